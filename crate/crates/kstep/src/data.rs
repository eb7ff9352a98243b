//! Dataset ingestion, covariate joins, and run manifests.
//!
//! Datasets are long-format CSV with columns subject_id, p, response
//! (0-100). Responses are kept on the raw 0-100 scale for exact round
//! trips; the unit-interval values used by the likelihood are rescaled and
//! clamped into [0.005, 0.995] on access, with a clamp counter recorded at
//! load time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampler::PlayerData;

/// Unit-interval responses are clamped into [CLAMP_LO, CLAMP_HI].
pub const CLAMP_LO: f64 = 0.005;
pub const CLAMP_HI: f64 = 0.995;

/// Optional per-subject covariates.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Covariates {
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub education: Option<String>,
    pub crt_pass: Option<f64>,
    pub time_games_minutes: Option<f64>,
    pub time_total_minutes: Option<f64>,
}

/// One subject's responses on the raw 0-100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    /// (p, y_raw) pairs in file order.
    pub responses: Vec<(f64, f64)>,
    pub covariates: Option<Covariates>,
}

impl SubjectData {
    /// Unit-rescaled, clamped responses for the likelihood.
    pub fn unit_responses(&self) -> Vec<(f64, f64)> {
        self.responses
            .iter()
            .map(|&(p, y)| (p, (y / 100.0).clamp(CLAMP_LO, CLAMP_HI)))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResponseDataset {
    pub subjects: Vec<SubjectData>,
    /// Number of responses clamped away from 0/100 at load.
    pub n_clamped: usize,
}

impl ResponseDataset {
    pub fn n_observations(&self) -> usize {
        self.subjects.iter().map(|s| s.responses.len()).sum()
    }

    /// Sampler view of the dataset.
    pub fn player_data(&self) -> Vec<PlayerData> {
        self.subjects
            .iter()
            .map(|s| PlayerData {
                id: s.id.clone(),
                responses: s.unit_responses(),
            })
            .collect()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }
}

/// Parses a long-format dataset CSV. Errors carry 1-based data row numbers.
pub fn load_dataset(path: &Path) -> Result<ResponseDataset> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cp), Some(cr)) = (col("subject_id"), col("p"), col("response")) else {
        return Err(Error::data(format!(
            "missing required columns in {}: need subject_id, p, response; found [{}]",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        )));
    };

    // preserve first-appearance order of subjects
    let mut order: Vec<String> = Vec::new();
    let mut by_subject: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut seen: BTreeMap<(String, u64), usize> = BTreeMap::new();
    let mut n_clamped = 0usize;

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let id = rec
            .get(ci)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::data(format!("row {row}: empty subject_id")))?
            .to_string();
        let p: f64 = rec
            .get(cp)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("row {row}: unparseable p")))?;
        let y: f64 = rec
            .get(cr)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("row {row}: unparseable response")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::data(format!("row {row}: p={p} outside [0,1]")));
        }
        if !(0.0..=100.0).contains(&y) {
            return Err(Error::data(format!(
                "row {row}: response={y} outside [0,100]"
            )));
        }
        let key = (id.clone(), p.to_bits());
        if let Some(prev) = seen.insert(key, row) {
            return Err(Error::data(format!(
                "duplicate (subject, p) pair ({id}, {p}) at rows {prev} and {row}"
            )));
        }
        let y_unit = y / 100.0;
        if !(CLAMP_LO..=CLAMP_HI).contains(&y_unit) {
            n_clamped += 1;
        }
        if !by_subject.contains_key(&id) {
            order.push(id.clone());
        }
        by_subject.entry(id).or_default().push((p, y));
    }

    let subjects = order
        .into_iter()
        .map(|id| {
            let responses = by_subject.remove(&id).unwrap();
            SubjectData {
                id,
                responses,
                covariates: None,
            }
        })
        .collect();
    Ok(ResponseDataset {
        subjects,
        n_clamped,
    })
}

/// Writes a dataset as long-format CSV with full-precision responses.
pub fn save_dataset(dataset: &ResponseDataset, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["subject_id", "p", "response"])?;
    for s in &dataset.subjects {
        for &(p, y) in &s.responses {
            wtr.write_record([s.id.as_str(), &format_num(p), &format_num(y)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest decimal string that round-trips the f64 exactly.
pub fn format_num(x: f64) -> String {
    let mut buf = ryu_like(x);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(x: f64) -> String {
    // {:?} on f64 prints the shortest representation that parses back exactly
    format!("{x:?}")
}

/// Joins a per-subject covariate CSV (keyed on subject_id) onto the
/// dataset. Unknown subjects in the covariate file are ignored; subjects
/// without covariate rows keep `None`.
pub fn join_covariates(dataset: &mut ResponseDataset, path: &Path) -> Result<usize> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let cid = col("subject_id")
        .ok_or_else(|| Error::data("covariate file missing subject_id column"))?;
    let numeric = |rec: &csv::StringRecord, idx: Option<usize>| -> Option<f64> {
        idx.and_then(|i| rec.get(i)).and_then(|s| s.trim().parse().ok())
    };
    let textual = |rec: &csv::StringRecord, idx: Option<usize>| -> Option<String> {
        idx.and_then(|i| rec.get(i))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
    };

    let cols = (
        col("age"),
        col("gender"),
        col("education"),
        col("crt_pass"),
        col("time_games_minutes"),
        col("time_total_minutes"),
    );
    let mut table: BTreeMap<String, Covariates> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec
            .get(cid)
            .ok_or_else(|| Error::data("covariate row missing subject_id"))?
            .to_string();
        table.insert(
            id,
            Covariates {
                age: numeric(&rec, cols.0),
                gender: textual(&rec, cols.1),
                education: textual(&rec, cols.2),
                crt_pass: numeric(&rec, cols.3),
                time_games_minutes: numeric(&rec, cols.4),
                time_total_minutes: numeric(&rec, cols.5),
            },
        );
    }
    let mut joined = 0;
    for s in &mut dataset.subjects {
        if let Some(c) = table.get(&s.id) {
            s.covariates = Some(c.clone());
            joined += 1;
        }
    }
    Ok(joined)
}

/// Provenance record written alongside every CLI run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// sha256 of each input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    /// Flat key=value configuration in effect.
    pub config: BTreeMap<String, String>,
    /// Output files produced by the run.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            input_hashes: BTreeMap::new(),
            config: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.input_hashes
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn set_config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Hex sha256 digest of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

/// Parses a flat `key = value` config file; '#' starts a comment.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::data(format!(
                "config line {}: expected key = value, got {raw:?}",
                i + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn write_temp(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn loads_full_grid_dataset() {
        let mut body = String::from("subject_id,p,response\n");
        for s in 0..106 {
            for p in [0.3, 0.4, 0.5, 0.6, 0.7, 1.0] {
                body.push_str(&format!("s{s},{p},{}\n", 50.0 * p));
            }
        }
        let (_d, path) = write_temp(&body);
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.subjects.len(), 106);
        assert_eq!(ds.n_observations(), 636);
        assert_eq!(ds.n_clamped, 0);
    }

    #[test]
    fn boundary_responses_clamped_on_access() {
        let (_d, path) = write_temp("subject_id,p,response\ns1,0.3,100\ns1,0.4,0\n");
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.n_clamped, 2);
        let unit = ds.subjects[0].unit_responses();
        assert_abs_diff_eq!(unit[0].1, 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(unit[1].1, 0.005, epsilon = 1e-15);
        // raw values preserved for round trips
        assert_eq!(ds.subjects[0].responses[0].1, 100.0);
    }

    #[test]
    fn duplicate_pair_names_both_rows() {
        let (_d, path) =
            write_temp("subject_id,p,response\ns1,0.3,40\ns1,0.5,50\ns1,0.3,41\n");
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("rows 1 and 3"), "{err}");
    }

    #[test]
    fn out_of_range_rows_rejected_with_row_number() {
        let (_d, path) = write_temp("subject_id,p,response\ns1,1.5,40\n");
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        let (_d, path) = write_temp("subject_id,p,response\ns1,0.5,140\n");
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("140"), "{err}");
    }

    #[test]
    fn missing_column_is_an_error() {
        let (_d, path) = write_temp("subject,p,response\ns1,0.3,40\n");
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("subject_id"), "{err}");
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let ds = ResponseDataset {
            subjects: vec![SubjectData {
                id: "s1".into(),
                responses: vec![(0.3, 33.333333333333336), (0.7, 1.0e-3), (1.0, 99.999)],
                covariates: None,
            }],
            n_clamped: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.subjects[0].responses, ds.subjects[0].responses);
    }

    #[test]
    fn covariate_join_attaches_matching_subjects() {
        let (_d, path) = write_temp("subject_id,p,response\ns1,0.3,40\ns2,0.3,50\n");
        let mut ds = load_dataset(&path).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cov = dir.path().join("cov.csv");
        std::fs::write(
            &cov,
            "subject_id,age,gender,education,crt_pass,time_games_minutes,time_total_minutes\n\
             s1,34,female,college,1,12.5,40\n\
             s9,50,male,hs,0,9,30\n",
        )
        .unwrap();
        let joined = join_covariates(&mut ds, &cov).unwrap();
        assert_eq!(joined, 1);
        let c = ds.subjects[0].covariates.as_ref().unwrap();
        assert_eq!(c.crt_pass, Some(1.0));
        assert_eq!(c.gender.as_deref(), Some("female"));
        assert!(ds.subjects[1].covariates.is_none());
    }

    #[test]
    fn manifest_round_trip_and_hashing() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        std::fs::write(&input, "abc").unwrap();
        let mut m = Manifest::new("fit", Some(7));
        m.add_input(&input).unwrap();
        m.set_config("samples", 10000);
        m.add_output(&dir.path().join("out.csv"));
        let mpath = dir.path().join("manifest.json");
        m.save(&mpath).unwrap();
        let back = Manifest::load(&mpath).unwrap();
        assert_eq!(back.seed, Some(7));
        // sha256("abc")
        assert_eq!(
            back.input_hashes.values().next().unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(back.config["samples"], "10000");
    }

    #[test]
    fn config_parser_handles_comments_and_blank_lines() {
        let map = parse_config_str("# top\nn = 106\nseed=7 # trailing\n\nlabel = default spec\n")
            .unwrap();
        assert_eq!(map["n"], "106");
        assert_eq!(map["seed"], "7");
        assert_eq!(map["label"], "default spec");
        assert!(parse_config_str("just words\n").is_err());
    }
}
