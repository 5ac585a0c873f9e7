//! Command implementations. Every command validates its full input
//! before the first write; outputs go through atomic temp-file renames.

use gaitsim::cycle::{detect_cycles, CycleError};
use gaitsim::features::{
    augment, flatten, gei, geni, normalize_silhouette, FeatureKind, FeatureVector, Provenance,
    FEATURE_DIM,
};
use gaitsim::raster::{decode_pbm, encode_pbm, encode_pgm, BinarySilhouette};
use gaitsim::recognition::{eigen_images, pca_fit, run_experiment, ConditionResult};
use gaitsim::rng;
use gaitsim::segment::{
    background_subtract, chroma_key, cluster_threshold, largest_component,
};
use gaitsim::similarity::{jaccard_aligned, phase_pair_indices, similarity_stats};
use gaitsim::synth::{generate_sequence, viewpoint_grid};
use gaitsim::raster::RgbImage;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::error::{data, validation, CliError};
use crate::io::{encode_png, fmt_f64, load_png, parse_csv, read_bytes, read_to_string, write_atomic};
use crate::svg;

const FRAMES_HEADER: &str = "sequence,frame,frame_path";
const MASKS_HEADER: &str = "sequence,frame,mask_path";
const CYCLES_HEADER: &str = "sequence,cycle_index,start_frame,end_frame";
const SIGNAL_HEADER: &str = "frame,count,smoothed";
const STATS_HEADER: &str = "subject,n,min,q1,median,q3,max";
const PAIRS_HEADER: &str = "subject,frame_a,frame_b,jaccard,dx,dy";
const RESULTS_HEADER: &str = "condition,k,train_n,test_n,accuracy";

fn sequence_name(identity: &str, variant: &str) -> String {
    format!("{identity}_{variant}")
}

/// Identity half of a `<identity>_<variant>` sequence name.
fn subject_of(sequence: &str) -> &str {
    sequence.rsplit_once('_').map(|(s, _)| s).unwrap_or(sequence)
}

pub fn cmd_synth(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    if config.identities.is_empty() {
        return Err(validation("identities: at least one identity is required"));
    }
    if config.variants.is_empty() {
        return Err(validation("variants: at least one variant is required"));
    }
    let settings = config.render_settings();

    let mut frames_csv = vec![FRAMES_HEADER.to_string()];
    let mut truth_csv = vec![CYCLES_HEADER.to_string()];
    for (ii, id_section) in config.identities.iter().enumerate() {
        let identity = config.walker_identity(id_section);
        for (vi, variant) in config.variants.iter().enumerate() {
            let confounders = config.confounders(variant);
            let sequence = sequence_name(&id_section.name, &variant.name);
            let seed = rng::hash3(config.seed, ii as u64, vi as u64);
            let output =
                generate_sequence(&identity, &confounders, &settings, config.duration, config.fps, seed)
                    .map_err(|e| data(format!("sequence {sequence}: {e}")))?;
            let dir = out.join("sequences").join(&sequence);
            for (fi, frame) in output.frames.iter().enumerate() {
                let rel = format!("sequences/{sequence}/frame_{fi:04}.png");
                write_atomic(&out.join(&rel), &encode_png(frame)?)?;
                frames_csv.push(format!("{sequence},{fi},{rel}"));
            }
            let background =
                RgbImage::filled(settings.width, settings.height, confounders.background_color);
            write_atomic(&dir.join("background.png"), &encode_png(&background)?)?;
            for (ci, (start, end)) in output.cycles.iter().enumerate() {
                truth_csv.push(format!("{sequence},{ci},{start},{end}"));
            }
        }
    }
    write_atomic(&out.join("frames.csv"), (frames_csv.join("\n") + "\n").as_bytes())?;
    write_atomic(&out.join("ground_truth.csv"), (truth_csv.join("\n") + "\n").as_bytes())?;
    Ok(())
}

/// Manifest rows grouped by sequence, frames sorted by index.
fn load_manifest(
    out: &Path,
    file: &str,
    header: &str,
) -> Result<Vec<(String, Vec<PathBuf>)>, CliError> {
    let path = out.join(file);
    let rows = parse_csv(&read_to_string(&path)?, &path, header)?;
    if rows.is_empty() {
        return Err(data(format!("{}: no entries", path.display())));
    }
    let mut grouped: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
    for row in &rows {
        if row.len() != 3 {
            return Err(data(format!("{}: malformed row {:?}", path.display(), row)));
        }
        let frame: usize = row[1]
            .parse()
            .map_err(|_| data(format!("{}: bad frame index {:?}", path.display(), row[1])))?;
        grouped.entry(row[0].clone()).or_default().push((frame, out.join(&row[2])));
    }
    Ok(grouped
        .into_iter()
        .map(|(seq, mut frames)| {
            frames.sort_by_key(|(fi, _)| *fi);
            (seq, frames.into_iter().map(|(_, p)| p).collect())
        })
        .collect())
}

pub fn cmd_segment(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let sequences = load_manifest(out, "frames.csv", FRAMES_HEADER)?;
    let method = config.segmentation.method.as_str();

    // resolve background images up front so nothing is written on a
    // missing-path failure
    let mut backgrounds: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (sequence, _) in &sequences {
        let path = match &config.segmentation.background {
            Some(p) => PathBuf::from(p),
            None => out.join("sequences").join(sequence).join("background.png"),
        };
        if !path.exists() {
            return Err(validation(format!(
                "segmentation: background image {} not found (required for the {method} path)",
                path.display()
            )));
        }
        backgrounds.insert(sequence.clone(), path);
    }

    let mut masks_csv = vec![MASKS_HEADER.to_string()];
    for (sequence, frame_paths) in &sequences {
        let background = load_png(&backgrounds[sequence])?;
        let key_color = background.get(0, 0);
        let masks: Result<Vec<BinarySilhouette>, CliError> = frame_paths
            .par_iter()
            .map(|path| {
                let frame = load_png(path)?;
                let mut mask = match method {
                    "lab" => {
                        let diff = background_subtract(&frame, &background)
                            .map_err(|e| data(format!("{}: {e}", path.display())))?;
                        cluster_threshold(&diff)
                            .map_err(|e| data(format!("{}: {e}", path.display())))?
                    }
                    _ => chroma_key(&frame, key_color, config.segmentation.tolerance),
                };
                if config.segmentation.largest_component {
                    mask = largest_component(&mask)
                        .map_err(|e| data(format!("{}: {e}", path.display())))?;
                }
                Ok(mask)
            })
            .collect();
        for (fi, mask) in masks?.iter().enumerate() {
            let rel = format!("masks/{sequence}/frame_{fi:04}.pbm");
            write_atomic(&out.join(&rel), &encode_pbm(mask))?;
            masks_csv.push(format!("{sequence},{fi},{rel}"));
        }
    }
    write_atomic(&out.join("masks.csv"), (masks_csv.join("\n") + "\n").as_bytes())?;
    Ok(())
}

fn load_masks(frame_paths: &[PathBuf]) -> Result<Vec<BinarySilhouette>, CliError> {
    frame_paths
        .par_iter()
        .map(|path| {
            decode_pbm(&read_bytes(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn cmd_cycles(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let sequences = load_manifest(out, "masks.csv", MASKS_HEADER)?;
    let params = config.cycle_params();

    let mut cycles_csv = vec![CYCLES_HEADER.to_string()];
    for (sequence, frame_paths) in &sequences {
        let masks = load_masks(frame_paths)?;
        let (raw, smoothed, cycles) = detect_cycles(&masks, &params, config.fps)
            .map_err(|e: CycleError| data(format!("sequence {sequence}: {e}")))?;
        let mut signal_csv = vec![SIGNAL_HEADER.to_string()];
        for (fi, (c, s)) in raw.values.iter().zip(&smoothed.values).enumerate() {
            signal_csv.push(format!("{fi},{},{}", fmt_f64(*c), fmt_f64(*s)));
        }
        write_atomic(
            &out.join("signals").join(format!("{sequence}.csv")),
            (signal_csv.join("\n") + "\n").as_bytes(),
        )?;
        for (ci, cycle) in cycles.iter().enumerate() {
            cycles_csv.push(format!(
                "{sequence},{ci},{},{}",
                cycle.start_frame, cycle.end_frame
            ));
        }
    }
    write_atomic(&out.join("cycles.csv"), (cycles_csv.join("\n") + "\n").as_bytes())?;
    Ok(())
}

fn load_cycles(out: &Path) -> Result<BTreeMap<String, Vec<(usize, usize)>>, CliError> {
    let path = out.join("cycles.csv");
    let rows = parse_csv(&read_to_string(&path)?, &path, CYCLES_HEADER)?;
    let mut grouped: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for row in &rows {
        if row.len() != 4 {
            return Err(data(format!("{}: malformed row {:?}", path.display(), row)));
        }
        let parse = |s: &str| -> Result<usize, CliError> {
            s.parse().map_err(|_| data(format!("{}: bad number {s:?}", path.display())))
        };
        grouped
            .entry(row[0].clone())
            .or_default()
            .push((parse(&row[2])?, parse(&row[3])?));
    }
    Ok(grouped)
}

pub fn cmd_features(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let sequences = load_manifest(out, "masks.csv", MASKS_HEADER)?;
    let cycles = load_cycles(out)?;
    let kind = config.feature_kind();
    let provenance = config.provenance();
    let crops = config.crop_margins();

    let mut header = String::from("label,provenance,kind,aug_id");
    for i in 0..FEATURE_DIM {
        header.push_str(&format!(",v{i}"));
    }
    let mut archive = vec![header];
    for (sequence, frame_paths) in &sequences {
        let Some(seq_cycles) = cycles.get(sequence) else {
            continue;
        };
        let masks = load_masks(frame_paths)?;
        let label = subject_of(sequence);
        for &(start, end) in seq_cycles {
            if end > masks.len() || start >= end {
                return Err(data(format!(
                    "sequence {sequence}: cycle [{start},{end}) outside {} frames",
                    masks.len()
                )));
            }
            let normalized: Result<Vec<BinarySilhouette>, CliError> = masks[start..end]
                .iter()
                .map(|m| {
                    normalize_silhouette(m).map_err(|e| data(format!("sequence {sequence}: {e}")))
                })
                .collect();
            let normalized = normalized?;
            let feature = match kind {
                FeatureKind::Gei => gei(&normalized),
                FeatureKind::Geni => geni(&normalized),
            }
            .map_err(|e| data(format!("sequence {sequence}: {e}")))?;
            let variants = augment(&feature, &crops)
                .map_err(|e| data(format!("sequence {sequence}: {e}")))?;
            for (aug_id, image) in variants.iter().enumerate() {
                let vector = flatten(image, label, provenance);
                let mut row = format!(
                    "{},{},{},{aug_id}",
                    vector.label,
                    vector.provenance.as_str(),
                    kind.as_str()
                );
                for v in &vector.values {
                    row.push(',');
                    row.push_str(&fmt_f64(*v));
                }
                archive.push(row);
            }
        }
    }
    if archive.len() == 1 {
        return Err(data("no cycles found to extract features from"));
    }
    write_atomic(&out.join("features.csv"), (archive.join("\n") + "\n").as_bytes())?;
    Ok(())
}

/// Cycle-indexed masks for every sequence of a run directory.
fn load_run_cycles(
    run: &Path,
) -> Result<BTreeMap<String, Vec<(usize, Vec<BinarySilhouette>)>>, CliError> {
    let sequences = load_manifest(run, "masks.csv", MASKS_HEADER)?;
    let cycles = load_cycles(run)?;
    let mut out = BTreeMap::new();
    for (sequence, frame_paths) in &sequences {
        let Some(seq_cycles) = cycles.get(sequence) else {
            continue;
        };
        let masks = load_masks(frame_paths)?;
        let mut entries = Vec::new();
        for &(start, end) in seq_cycles {
            if end > masks.len() || start >= end {
                return Err(data(format!(
                    "sequence {sequence}: cycle [{start},{end}) outside {} frames",
                    masks.len()
                )));
            }
            entries.push((start, masks[start..end].to_vec()));
        }
        out.insert(sequence.clone(), entries);
    }
    Ok(out)
}

pub fn cmd_similarity(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let section = config
        .similarity
        .as_ref()
        .ok_or_else(|| validation("similarity: config section missing"))?;
    let set_a = load_run_cycles(Path::new(&section.set_a))?;
    let set_b = load_run_cycles(Path::new(&section.set_b))?;
    let same_set = section.set_a == section.set_b;

    // subject -> ordered cycle lists pooled over that subject's sequences;
    // within one set consecutive cycles never pair across sequences
    type CycleList = Vec<(usize, Vec<BinarySilhouette>)>;
    let pool = |set: &BTreeMap<String, CycleList>| {
        let mut by_subject: BTreeMap<String, Vec<CycleList>> = BTreeMap::new();
        for (sequence, cycles) in set {
            by_subject
                .entry(subject_of(sequence).to_string())
                .or_default()
                .push(cycles.clone());
        }
        by_subject
    };
    let pool_a = pool(&set_a);
    let pool_b = pool(&set_b);

    let mut pairs_csv = vec![PAIRS_HEADER.to_string()];
    let mut stats_csv = vec![STATS_HEADER.to_string()];
    for (subject, seqs_a) in &pool_a {
        let Some(seqs_b) = pool_b.get(subject) else {
            continue;
        };
        // same set: consecutive cycles of each sequence; two sets:
        // matching cycle indices of the subject's pooled cycle streams
        let mut cycle_pairs: Vec<(
            &(usize, Vec<BinarySilhouette>),
            &(usize, Vec<BinarySilhouette>),
        )> = Vec::new();
        if same_set {
            for cycles in seqs_a {
                cycle_pairs.extend(cycles.iter().zip(cycles.iter().skip(1)));
            }
        } else {
            let flat_a: Vec<_> = seqs_a.iter().flatten().collect();
            let flat_b: Vec<_> = seqs_b.iter().flatten().collect();
            cycle_pairs.extend(flat_a.into_iter().zip(flat_b));
        }
        let mut values = Vec::new();
        for ((start_a, cycle_a), (start_b, cycle_b)) in cycle_pairs {
            let indices = phase_pair_indices(cycle_a.len(), cycle_b.len())
                .map_err(|e| data(format!("subject {subject}: {e}")))?;
            for (ia, ib) in indices {
                let result = jaccard_aligned(&cycle_a[ia], &cycle_b[ib])
                    .map_err(|e| data(format!("subject {subject}: {e}")))?;
                pairs_csv.push(format!(
                    "{subject},{},{},{},{},{}",
                    start_a + ia,
                    start_b + ib,
                    fmt_f64(result.value),
                    result.shift.0,
                    result.shift.1
                ));
                values.push(result.value);
            }
        }
        if values.is_empty() {
            continue;
        }
        let stats = similarity_stats(&values, subject)
            .map_err(|e| data(format!("subject {subject}: {e}")))?;
        stats_csv.push(format!(
            "{subject},{},{},{},{},{},{}",
            values.len(),
            fmt_f64(stats.min),
            fmt_f64(stats.q1),
            fmt_f64(stats.median),
            fmt_f64(stats.q3),
            fmt_f64(stats.max)
        ));
    }
    if stats_csv.len() == 1 {
        return Err(data("similarity: no overlapping subjects with cycles"));
    }
    write_atomic(&out.join("similarity_pairs.csv"), (pairs_csv.join("\n") + "\n").as_bytes())?;
    write_atomic(&out.join("similarity_stats.csv"), (stats_csv.join("\n") + "\n").as_bytes())?;
    Ok(())
}

fn load_feature_archive(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("label,provenance,kind,aug_id,v0") => {}
        _ => return Err(data(format!("{}: not a feature archive", path.display()))),
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + FEATURE_DIM {
            return Err(data(format!(
                "{} line {}: expected {} fields, found {}",
                path.display(),
                ln + 2,
                4 + FEATURE_DIM,
                fields.len()
            )));
        }
        let provenance = match fields[1] {
            "real-proxy" => Provenance::RealProxy,
            "synthetic" => Provenance::Synthetic,
            other => {
                return Err(data(format!(
                    "{} line {}: unknown provenance {other:?}",
                    path.display(),
                    ln + 2
                )))
            }
        };
        let values: Result<Vec<f64>, CliError> = fields[4..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    data(format!("{} line {}: bad number {f:?}", path.display(), ln + 2))
                })
            })
            .collect();
        out.push(FeatureVector {
            values: values?,
            label: fields[0].to_string(),
            provenance,
        });
    }
    if out.is_empty() {
        return Err(data(format!("{}: empty feature archive", path.display())));
    }
    Ok(out)
}

fn condition_slug(c: gaitsim::recognition::Condition) -> String {
    c.as_str()
        .to_ascii_lowercase()
        .replace('%', "")
        .replace('+', "_")
        .replace('-', "_")
}

pub fn cmd_experiment(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let section = config
        .experiment
        .as_ref()
        .ok_or_else(|| validation("experiment: config section missing"))?;
    let real = load_feature_archive(Path::new(&section.real))?;
    let synth = load_feature_archive(Path::new(&section.synth))?;
    let spec = config.experiment_spec(section);
    let result = run_experiment(&real, &synth, &spec).map_err(|e| data(format!("experiment: {e}")))?;

    let mut results_csv = vec![RESULTS_HEADER.to_string()];
    for row in &result.rows {
        results_csv.push(format!(
            "{},{},{},{},{}",
            row.condition.as_str(),
            row.k,
            row.train_n,
            row.test_n,
            fmt_f64(row.accuracy)
        ));
        write_confusion(out, row)?;
    }
    write_atomic(&out.join("results.csv"), (results_csv.join("\n") + "\n").as_bytes())?;

    // eigen-image grid of the real archive, when it has enough structure
    let real_rows: Vec<Vec<f64>> = real.iter().map(|v| v.values.clone()).collect();
    if let Ok(model) = pca_fit(&real_rows, 9) {
        if let Ok(grid) = eigen_images(&model) {
            write_atomic(&out.join("eigen_components.pgm"), &encode_pgm(&grid))?;
        }
    }

    let plot = svg::accuracy_plot(&result.rows);
    write_atomic(&out.join("accuracy_vs_k.svg"), plot.as_bytes())?;
    Ok(())
}

fn write_confusion(out: &Path, row: &ConditionResult) -> Result<(), CliError> {
    let mut csv = vec![format!("label,{}", row.labels.join(","))];
    for (label, counts) in row.labels.iter().zip(&row.confusion) {
        let cells: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
        csv.push(format!("{label},{}", cells.join(",")));
    }
    let name = format!("confusion_{}_k{}.csv", condition_slug(row.condition), row.k);
    write_atomic(&out.join("confusion").join(name), (csv.join("\n") + "\n").as_bytes())
}

pub fn cmd_viewsweep(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let grid = viewpoint_grid(config.viewsweep.step);
    let mut csv = vec!["index,azimuth,elevation".to_string()];
    for (i, (az, el)) in grid.iter().enumerate() {
        csv.push(format!("{i},{},{}", fmt_f64(*az), fmt_f64(*el)));
    }
    write_atomic(&out.join("viewsweep.csv"), (csv.join("\n") + "\n").as_bytes())?;
    Ok(())
}

pub fn cmd_plot(config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let section = config
        .plot
        .as_ref()
        .ok_or_else(|| validation("plot: config section missing"))?;
    if section.results.is_none() && section.stats.is_none() {
        return Err(validation("plot: set at least one of plot.results / plot.stats"));
    }
    if let Some(results) = &section.results {
        let path = Path::new(results);
        let rows = parse_csv(&read_to_string(path)?, path, RESULTS_HEADER)?;
        let parsed: Result<Vec<(String, usize, f64)>, CliError> = rows
            .iter()
            .map(|row| {
                if row.len() != 5 {
                    return Err(data(format!("{}: malformed row {row:?}", path.display())));
                }
                let k = row[1]
                    .parse()
                    .map_err(|_| data(format!("{}: bad k {:?}", path.display(), row[1])))?;
                let acc = row[4]
                    .parse()
                    .map_err(|_| data(format!("{}: bad accuracy {:?}", path.display(), row[4])))?;
                Ok((row[0].clone(), k, acc))
            })
            .collect();
        let plot = svg::accuracy_plot_from_rows(&parsed?);
        write_atomic(&out.join("accuracy_vs_k.svg"), plot.as_bytes())?;
    }
    if let Some(stats) = &section.stats {
        let path = Path::new(stats);
        let rows = parse_csv(&read_to_string(path)?, path, STATS_HEADER)?;
        let parsed: Result<Vec<svg::BoxStats>, CliError> = rows
            .iter()
            .map(|row| {
                if row.len() != 7 {
                    return Err(data(format!("{}: malformed row {row:?}", path.display())));
                }
                let num = |s: &str| -> Result<f64, CliError> {
                    s.parse()
                        .map_err(|_| data(format!("{}: bad number {s:?}", path.display())))
                };
                Ok(svg::BoxStats {
                    subject: row[0].clone(),
                    min: num(&row[2])?,
                    q1: num(&row[3])?,
                    median: num(&row[4])?,
                    q3: num(&row[5])?,
                    max: num(&row[6])?,
                })
            })
            .collect();
        let plot = svg::box_plot(&parsed?);
        write_atomic(&out.join("similarity_box.svg"), plot.as_bytes())?;
    }
    Ok(())
}
