//! Trace → CIR → augment → features over a receiver plan, producing labeled
//! datasets with spatially blocked train/test splits, plus their CSV and
//! JSON sidecar formats.

use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{augment, to_sparse_cir, AugmentSpec};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::geometry::Vec3;
use crate::parallel::{map_indexed, Parallelism};
use crate::scene::{RadioConfig, Scene};
use crate::tracer::{trace_all, LinkResult};
use crate::{Label, TOOL_VERSION};

pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
pub const DEFAULT_BLOCK_M: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRow {
    pub replica: u32,
    pub bandwidth_hz: f64,
    pub features: FeatureVector,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub test_fraction: f64,
    pub block_m: f64,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Contents of the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// FNV-1a 64 of the canonical scene JSON, hex.
    pub scene_hash: String,
    pub radio: RadioConfig,
    pub augment: AugmentSpec,
    pub seed: u64,
    pub n_links: usize,
    pub dead_links: usize,
    pub uninformative_samples: usize,
    pub creation_order: String,
    pub split: Option<SplitMeta>,
    pub warnings: Vec<String>,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub feature_names: Vec<String>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn class_counts(&self, split: Option<Split>) -> [usize; 2] {
        let mut c = [0; 2];
        for r in self.rows.iter().filter(|r| split.is_none_or(|s| r.split == s)) {
            c[r.features.label.index()] += 1;
        }
        c
    }
}

fn link_rows(link: &LinkResult, link_index: u32, spec: &AugmentSpec, radio: &RadioConfig) -> Result<(Vec<DatasetRow>, usize)> {
    let Some(label) = link.los_state.label() else {
        return Ok((Vec::new(), 0));
    };
    let cir = to_sparse_cir(link)?;
    let nb = spec.bandwidth_set_hz.len();
    let mut rows = Vec::with_capacity(spec.outputs_per_link());
    let mut skipped = 0;
    for (i, sampled) in augment(&cir, spec, radio, link_index)?.into_iter().enumerate() {
        match extract_features(&sampled, radio.tx_power_dbm, label, link.rx_position, link_index) {
            Ok(features) => rows.push(DatasetRow {
                replica: (i / nb) as u32,
                bandwidth_hz: sampled.bandwidth_hz,
                features,
                split: Split::Train,
            }),
            Err(Error::Uninformative) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((rows, skipped))
}

/// Full link pipeline over the scene's receiver plan. Every row starts on
/// the train side; see [`split_spatial`].
pub fn generate_dataset(scene: &Scene, spec: &AugmentSpec, par: Parallelism) -> Result<Dataset> {
    spec.validate()?;
    let links = trace_all(scene, par)?;
    generate_from_links(scene, &links, spec, par)
}

/// [`generate_dataset`] over links that were already traced.
pub fn generate_from_links(scene: &Scene, links: &[LinkResult], spec: &AugmentSpec, par: Parallelism) -> Result<Dataset> {
    spec.validate()?;
    let radio = scene.radio();
    let per_link = map_indexed(par, links.len(), |i| link_rows(&links[i], i as u32, spec, radio));

    let mut rows = Vec::new();
    let mut uninformative = 0;
    for r in per_link {
        let (link_rows, skipped) = r?;
        rows.extend(link_rows);
        uninformative += skipped;
    }
    let dead_links = links.iter().filter(|l| l.los_state.label().is_none()).count();
    if dead_links == links.len() {
        return Err(Error::Empty("every link is dead, no dataset can be built"));
    }

    let mut meta = DatasetMeta {
        scene_hash: format!("{:016x}", scene.hash()),
        radio: radio.clone(),
        augment: spec.clone(),
        seed: spec.rng_seed,
        n_links: links.len(),
        dead_links,
        uninformative_samples: uninformative,
        creation_order: "link_index, replica, bandwidth".into(),
        split: None,
        warnings: Vec::new(),
        tool_version: TOOL_VERSION.into(),
    };
    let dataset_counts = {
        let mut c = [0usize; 2];
        rows.iter().for_each(|r: &DatasetRow| c[r.features.label.index()] += 1);
        c
    };
    if dataset_counts.contains(&0) {
        meta.warnings.push(format!(
            "single-class dataset: {} LOS rows, {} NLOS rows",
            dataset_counts[0], dataset_counts[1]
        ));
    }
    Ok(Dataset {
        rows,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        meta,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Integer block coordinates of a position.
pub fn block_of(p: Vec3, block_m: f64) -> [i64; 3] {
    [
        (p.x / block_m).floor() as i64,
        (p.y / block_m).floor() as i64,
        (p.z / block_m).floor() as i64,
    ]
}

/// Seeded uniform draw in [0, 1) for a spatial block.
pub fn block_draw(block: [i64; 3], seed: u64) -> f64 {
    let mut h = fnv::FnvHasher::default();
    for c in block {
        h.write_i64(c);
    }
    h.write_u64(seed);
    (splitmix64(h.finish()) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn block_is_test(block: [i64; 3], test_fraction: f64, seed: u64) -> bool {
    block_draw(block, seed) < test_fraction
}

/// Assigns whole square blocks of side `block_m` to the test side with
/// probability `test_fraction`. Rows sharing a position share a side.
pub fn split_spatial(dataset: &Dataset, test_fraction: f64, block_m: f64, seed: u64) -> Result<Dataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    if !(block_m > 0.0 && block_m.is_finite()) {
        return Err(Error::InvalidArgument(format!("block size {block_m} m must be positive")));
    }
    let mut out = dataset.clone();
    for row in &mut out.rows {
        row.split = if block_is_test(block_of(row.features.position, block_m), test_fraction, seed) {
            Split::Test
        } else {
            Split::Train
        };
    }
    let test_rows = out.rows.iter().filter(|r| r.split == Split::Test).count();
    let train_rows = out.rows.len() - test_rows;
    if test_rows == 0 || train_rows == 0 {
        return Err(Error::DegenerateSplit(format!(
            "{train_rows} train rows and {test_rows} test rows with {block_m} m blocks"
        )));
    }
    if out.class_counts(Some(Split::Train)).contains(&0) {
        out.meta.warnings.push("train split holds a single class".into());
    }
    out.meta.split = Some(SplitMeta {
        test_fraction,
        block_m,
        seed,
        train_rows,
        test_rows,
    });
    Ok(out)
}

/// Header of the dataset CSV.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["link_index", "replica", "bandwidth_hz", "x", "y", "z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    h.push("label".into());
    h.push("split".into());
    h
}

pub fn write_csv<W: Write>(rows: &[DatasetRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for r in rows {
        let f = &r.features;
        let mut rec = vec![
            f.link_index.to_string(),
            r.replica.to_string(),
            r.bandwidth_hz.to_string(),
            f.position.x.to_string(),
            f.position.y.to_string(),
            f.position.z.to_string(),
        ];
        rec.extend(f.values().iter().map(|v| v.to_string()));
        rec.push(f.label.index().to_string());
        rec.push(r.split.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<DatasetRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(Error::validation("dataset CSV", "unexpected header"));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let entity = || format!("dataset CSV row {}", line + 1);
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::validation(entity(), format!("column {} is not a number", csv_header()[i])))
        };
        let int = |i: usize| -> Result<u32> {
            rec[i]
                .parse::<u32>()
                .map_err(|_| Error::validation(entity(), format!("column {} is not an integer", csv_header()[i])))
        };
        let mut v = [0.0; N_FEATURES];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = num(6 + j)?;
        }
        let label = Label::from_index(int(6 + N_FEATURES)? as usize)
            .ok_or_else(|| Error::validation(entity(), "label must be 0 or 1"))?;
        let split = match &rec[7 + N_FEATURES] {
            "train" => Split::Train,
            "test" => Split::Test,
            _ => return Err(Error::validation(entity(), "split must be train or test")),
        };
        rows.push(DatasetRow {
            replica: int(1)?,
            bandwidth_hz: num(2)?,
            features: FeatureVector {
                rssi_dbm: v[0],
                max_amplitude: v[1],
                total_energy: v[2],
                mean_excess_delay_s: v[3] / 1e9,
                rms_delay_spread_s: v[4] / 1e9,
                kurtosis: v[5],
                tof_s: v[6] / 1e9,
                label,
                position: Vec3::new(num(3)?, num(4)?, num(5)?),
                link_index: int(0)?,
            },
            split,
        });
    }
    Ok(rows)
}

/// `data.csv` → `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes the CSV and its meta sidecar next to it.
pub fn write_dataset(dataset: &Dataset, csv_path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(&dataset.rows, &mut buf)?;
    std::fs::write(csv_path, buf).map_err(|e| Error::io(csv_path, e))?;
    let meta = meta_path(csv_path);
    let mut json = serde_json::to_string_pretty(&dataset.meta)?;
    json.push('\n');
    std::fs::write(&meta, json).map_err(|e| Error::io(meta, e))
}

pub fn read_dataset_rows(csv_path: &Path) -> Result<Vec<DatasetRow>> {
    let f = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    read_csv(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::make_cabin_scene;

    fn row_at(x: f64, y: f64, replica: u32) -> DatasetRow {
        DatasetRow {
            replica,
            bandwidth_hz: 499.2e6,
            features: FeatureVector {
                rssi_dbm: -60.0,
                max_amplitude: 1.0,
                total_energy: 1.0,
                mean_excess_delay_s: 1e-8,
                rms_delay_spread_s: 1e-9,
                kurtosis: 3.0,
                tof_s: 1e-8,
                label: if replica.is_multiple_of(2) { Label::Los } else { Label::Nlos },
                position: Vec3::new(x, y, 1.0),
                link_index: 0,
            },
            split: Split::Train,
        }
    }

    fn grid_dataset(n: usize, spacing: f64) -> Dataset {
        let rows = (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| (0..2).map(move |r| row_at(i as f64 * spacing + 0.5, j as f64 * spacing + 0.5, r))))
            .collect();
        Dataset {
            rows,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            meta: DatasetMeta {
                scene_hash: String::new(),
                radio: RadioConfig::uwb(1e-7),
                augment: AugmentSpec::default(),
                seed: 0,
                n_links: 0,
                dead_links: 0,
                uninformative_samples: 0,
                creation_order: String::new(),
                split: None,
                warnings: vec![],
                tool_version: String::new(),
            },
        }
    }

    #[test]
    fn test_block_count_is_binomial() {
        let ds = grid_dataset(10, 1.0);
        let split = split_spatial(&ds, 0.3, 1.0, 11).unwrap();
        let mut blocks = std::collections::BTreeMap::new();
        for r in &split.rows {
            blocks.insert(block_of(r.features.position, 1.0), r.split);
        }
        assert_eq!(blocks.len(), 100);
        let n_test = blocks.values().filter(|s| **s == Split::Test).count();
        // 2σ of Binomial(100, 0.3) is 9.2.
        assert!((21..=39).contains(&n_test), "{n_test}");
    }

    #[test]
    fn replicas_share_split_side() {
        let ds = grid_dataset(6, 0.25);
        let split = split_spatial(&ds, 0.3, 1.0, 5).unwrap();
        for pair in split.rows.chunks(2) {
            assert_eq!(pair[0].split, pair[1].split);
        }
    }

    #[test]
    fn single_block_is_degenerate() {
        let ds = grid_dataset(4, 0.25);
        assert!(matches!(split_spatial(&ds, 0.3, 100.0, 1), Err(Error::DegenerateSplit(_))));
        assert!(split_spatial(&ds, 0.0, 1.0, 1).is_err());
        assert!(split_spatial(&ds, 0.3, 0.0, 1).is_err());
    }

    #[test]
    fn split_depends_on_position_not_order() {
        let ds = grid_dataset(8, 0.5);
        let a = split_spatial(&ds, 0.3, 1.0, 3).unwrap();
        let mut rev = ds.clone();
        rev.rows.reverse();
        let b = split_spatial(&rev, 0.3, 1.0, 3).unwrap();
        let mut bb = b.rows.clone();
        bb.reverse();
        assert_eq!(a.rows, bb);
    }

    #[test]
    fn csv_round_trip() {
        let ds = grid_dataset(3, 0.37);
        let mut buf = Vec::new();
        write_csv(&ds.rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        // ns conversion is not exact for the delay columns; compare the
        // serialized form instead.
        let mut buf2 = Vec::new();
        write_csv(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.len(), ds.rows.len());
    }

    #[test]
    fn empty_cabin_is_all_los() {
        let scene = make_cabin_scene(6.0, 2.0, 2.0, 0, 1).unwrap();
        let ds = generate_dataset(&scene, &AugmentSpec::default(), Parallelism::Auto).unwrap();
        assert!(ds.rows.iter().all(|r| r.features.label == Label::Los));
        assert_eq!(ds.meta.dead_links, 0);
        assert_eq!(ds.rows.len(), scene.receiver_points().len());
        assert_eq!(ds.meta.warnings.len(), 1);
    }
}
