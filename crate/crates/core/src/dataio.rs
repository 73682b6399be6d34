//! On-disk formats.
//!
//! A dataset directory holds `manifest.json` and `waveforms.f64le`. The blob
//! is record-major, channel-major little-endian `f64`; each record occupies
//! `6 * 1000 * 8` bytes at the offset listed in the manifest. Features are a
//! CSV with header `record_id,label,f000,...`; models and reports are JSON.
//! JSON output always has sorted keys and shortest round-trip floats, so equal
//! values give equal bytes. Every file is written to a temporary name in the
//! target directory and then renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, EvalReport, Leaderboard};
use crate::features::FeatureVector;
use crate::models::TrainedModel;
use crate::synth::{CircuitConfig, EventClass, SynthParams, WaveformRecord, CHANNELS, CHANNEL_NAMES, SAMPLES_PER_CHANNEL};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WAVEFORM_FILE: &str = "waveforms.f64le";
pub const RECORD_BYTES: usize = CHANNELS * SAMPLES_PER_CHANNEL * 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u64,
    pub class_code: usize,
    pub params: SynthParams,
    pub byte_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub sample_rate: f64,
    pub samples_per_channel: usize,
    pub channel_order: Vec<String>,
    pub class_names: Vec<String>,
    pub circuit: CircuitConfig,
    pub records: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: CircuitConfig,
    pub records: Vec<WaveformRecord>,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap.
    let v = serde_json::to_value(value).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::load(format!("{}: {e}", path.display())))
}

pub fn write_dataset(records: &[WaveformRecord], config: &CircuitConfig, dir: &Path) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(Error::invalid("refusing to write an empty dataset"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(records.len() * RECORD_BYTES);
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        if r.samples.len() != CHANNELS * SAMPLES_PER_CHANNEL {
            return Err(Error::invalid(format!("record {} has {} samples", r.id, r.samples.len())));
        }
        entries.push(ManifestEntry {
            id: r.id,
            class_code: r.label.code(),
            params: r.params.clone(),
            byte_offset: blob.len() as u64,
        });
        for v in &r.samples {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        sample_rate: config.sample_rate,
        samples_per_channel: SAMPLES_PER_CHANNEL,
        channel_order: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        class_names: EventClass::ALL.iter().map(|c| c.name().to_string()).collect(),
        circuit: config.clone(),
        records: entries,
    };
    // The manifest goes last so a reader never sees it without its blob.
    atomic_write(&dir.join(WAVEFORM_FILE), &blob)?;
    let path = dir.join(MANIFEST_FILE);
    atomic_write(&path, canonical_json(&manifest)?.as_bytes())?;
    Ok(path)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST_FILE);
    let manifest: DatasetManifest = parse_json(&mpath, &read_file(&mpath)?)?;
    validate_manifest(&manifest)?;
    let bpath = dir.join(WAVEFORM_FILE);
    let blob = read_file(&bpath)?;

    let expected = manifest.records.len() * RECORD_BYTES;
    if blob.len() < expected {
        let index = blob.len() / RECORD_BYTES;
        return Err(Error::load(format!(
            "{} is truncated: record {index} needs bytes {}..{}, file has {}",
            bpath.display(),
            index * RECORD_BYTES,
            (index + 1) * RECORD_BYTES,
            blob.len()
        )));
    }
    if blob.len() > expected {
        return Err(Error::load(format!(
            "{} has {} trailing bytes beyond {} records",
            bpath.display(),
            blob.len() - expected,
            manifest.records.len()
        )));
    }

    let config = manifest.circuit;
    let mut records = Vec::with_capacity(manifest.records.len());
    for (index, e) in manifest.records.into_iter().enumerate() {
        let start = e.byte_offset as usize;
        let samples: Vec<f64> = blob[start..start + RECORD_BYTES]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let label = EventClass::from_code(e.class_code).map_err(|_| {
            Error::load(format!("record {index}: class code {} out of range", e.class_code))
        })?;
        e.params
            .validate(label, &config)
            .map_err(|err| Error::load(format!("record {index}: {err}")))?;
        let record = WaveformRecord::new(e.id, label, e.params, samples)
            .map_err(|err| Error::load(format!("record {index}: {err}")))?;
        records.push(record);
    }
    Ok(Dataset { config, records })
}

fn validate_manifest(m: &DatasetManifest) -> Result<()> {
    if m.format_version != FORMAT_VERSION {
        return Err(Error::load(format!(
            "dataset format version {} (this build reads {FORMAT_VERSION})",
            m.format_version
        )));
    }
    m.circuit.validate().map_err(|e| Error::load(format!("manifest circuit: {e}")))?;
    if m.samples_per_channel != SAMPLES_PER_CHANNEL || m.sample_rate != m.circuit.sample_rate {
        return Err(Error::load("manifest sampling does not match the record layout"));
    }
    if m.channel_order != CHANNEL_NAMES {
        return Err(Error::load(format!("unexpected channel order {:?}", m.channel_order)));
    }
    let names: Vec<&str> = EventClass::ALL.iter().map(|c| c.name()).collect();
    if m.class_names != names {
        return Err(Error::load(format!("unexpected class names {:?}", m.class_names)));
    }
    if m.records.is_empty() {
        return Err(Error::load("manifest lists no records"));
    }
    for (i, e) in m.records.iter().enumerate() {
        if e.byte_offset != (i * RECORD_BYTES) as u64 {
            return Err(Error::load(format!(
                "record {i}: offset {} breaks the {RECORD_BYTES}-byte stride",
                e.byte_offset
            )));
        }
    }
    Ok(())
}

/// Header names `f000`, `f001`, ... for `dim` feature columns.
pub fn feature_column(i: usize) -> String {
    format!("f{i:03}")
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_features(path: &Path, features: &[FeatureVector]) -> Result<()> {
    let dim = features.first().map_or(0, |f| f.values.len());
    if features.is_empty() || dim == 0 {
        return Err(Error::invalid("refusing to write an empty feature set"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["record_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(feature_column));
    w.write_record(&header).map_err(csv_error)?;
    for f in features {
        if f.values.len() != dim {
            return Err(Error::invalid(format!("record {} has {} features, expected {dim}", f.record_id, f.values.len())));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("record {} has a non-finite feature", f.record_id)));
        }
        let mut row = vec![f.record_id.to_string(), f.label.name().to_string()];
        row.extend(f.values.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    atomic_write(path, &bytes)
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let bytes = read_file(path)?;
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes.as_slice());
    let mut rows = r.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| Error::load(format!("{}: {e}", path.display())))?,
        None => return Err(Error::load(format!("{}: empty file", path.display()))),
    };
    let dim = header.len().saturating_sub(2);
    let header_ok = header.len() > 2
        && &header[0] == "record_id"
        && &header[1] == "label"
        && (0..dim).all(|i| header[i + 2] == feature_column(i));
    if !header_ok {
        return Err(Error::load(format!(
            "{}: header must be record_id,label,f000,...",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (k, row) in rows.enumerate() {
        // Data rows are numbered from 1; the header is line 1 of the file.
        let n = k + 1;
        let row = row.map_err(|e| Error::load(format!("{}: row {n}: {e}", path.display())))?;
        if row.len() != header.len() {
            return Err(Error::load(format!(
                "{}: row {n} (line {}) has {} fields, header has {}",
                path.display(),
                n + 1,
                row.len(),
                header.len()
            )));
        }
        let bad = |what: &str| Error::load(format!("{}: row {n}: {what}", path.display()));
        let record_id = row[0].parse::<u64>().map_err(|_| bad("record_id is not an integer"))?;
        let label = EventClass::from_name(&row[1]).map_err(|_| bad(&format!("unknown label '{}'", &row[1])))?;
        let mut values = Vec::with_capacity(dim);
        for (j, field) in row.iter().skip(2).enumerate() {
            let v = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(&format!("column {} is not a finite number", feature_column(j))))?;
            values.push(v);
        }
        out.push(FeatureVector {
            record_id,
            label,
            values,
        });
    }
    if out.is_empty() {
        return Err(Error::load(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    canonical_json(&ModelFile {
        format_version: FORMAT_VERSION,
        model: model.clone(),
    })
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::load(format!("model: {e}")))?;
    match v.get("format_version").and_then(|x| x.as_u64()) {
        Some(ver) if ver == FORMAT_VERSION as u64 => {}
        Some(ver) => {
            return Err(Error::load(format!(
                "model format version {ver} (this build reads {FORMAT_VERSION})"
            )))
        }
        None => return Err(Error::load("model file has no format_version")),
    }
    let file: ModelFile = serde_json::from_value(v).map_err(|e| Error::load(format!("model: {e}")))?;
    let m = file.model;
    m.spec.validate().map_err(|e| Error::load(format!("model: {e}")))?;
    let n = &m.normalizer;
    if n.dim() == 0 || n.sd.len() != n.dim() || n.sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::load("model: malformed normalizer"));
    }
    Ok(m)
}

pub fn write_model(path: &Path, model: &TrainedModel) -> Result<()> {
    atomic_write(path, model_to_json(model)?.as_bytes())
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::load(format!("{}: not UTF-8", path.display())))?;
    model_from_json(text).map_err(|e| match e {
        Error::Load(msg) => Error::load(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    atomic_write(path, canonical_json(report)?.as_bytes())
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    parse_json(path, &read_file(path)?)
}

/// Counts with true classes as rows; header and first column carry names.
pub fn confusion_csv(conf: &ConfusionMatrix) -> String {
    let mut s = String::from("true\\predicted");
    for c in EventClass::ALL {
        s.push(',');
        s.push_str(c.name());
    }
    s.push('\n');
    for (i, row) in conf.counts.iter().enumerate() {
        s.push_str(EventClass::ALL[i].name());
        for v in row {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

pub fn write_confusion_csv(path: &Path, conf: &ConfusionMatrix) -> Result<()> {
    atomic_write(path, confusion_csv(conf).as_bytes())
}

/// Leaderboard table. Wall-clock times are left out so reruns compare
/// byte for byte.
pub fn leaderboard_csv(board: &Leaderboard) -> String {
    let mut s = String::from("rank,model,accuracy,macro_f1,top_pair,top_pair_count,status\n");
    for (i, e) in board.entries.iter().enumerate() {
        match (&e.report, &e.error) {
            (Some(r), _) => {
                let macro_f1 = r.per_class.iter().map(|m| m.f1).sum::<f64>() / r.per_class.len() as f64;
                let (pair, count) = match r.top_pair {
                    Some(p) => (format!("{}/{}", p.a, p.b), p.count.to_string()),
                    None => (String::new(), "0".to_string()),
                };
                s.push_str(&format!(
                    "{},{},{},{},{pair},{count},ok\n",
                    i + 1,
                    e.model,
                    fmt_f64(r.accuracy),
                    fmt_f64(macro_f1)
                ));
            }
            (None, err) => {
                let msg = err.as_deref().unwrap_or("failed").replace([',', '\n', '"'], " ");
                s.push_str(&format!("{},{},,,,,error: {msg}\n", i + 1, e.model));
            }
        }
    }
    s
}

pub fn write_leaderboard_csv(path: &Path, board: &Leaderboard) -> Result<()> {
    atomic_write(path, leaderboard_csv(board).as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}
