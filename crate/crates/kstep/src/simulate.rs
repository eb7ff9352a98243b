//! Synthetic populations with known ground truth for recovery experiments.
//!
//! Subjects are drawn from a mixture of archetypes: structural k-step
//! thinkers (level-k, CH-Poisson or random-Dirichlet beliefs), the
//! constant-increment heuristic (a fixed raise per grid position, which is
//! concave over the stretched last gap of the experimental p-grid), flat
//! uniform-random players, and monotone-but-concave players. Only the
//! k-step archetype is compliant ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BeliefMatrix, KStepPlayer};
use crate::model::{beta_shapes, S_LEVELS};

/// Default experimental p-grid.
pub const DEFAULT_P_GRID: [f64; 6] = [0.3, 0.4, 0.5, 0.6, 0.7, 1.0];

/// How k-step subjects form their belief matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum BeliefGen {
    LevelK,
    ChPoisson { tau: f64 },
    RandomDirichlet,
}

/// Mixture weights over the four archetypes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArchetypeWeights {
    pub kstep: f64,
    pub constant_increment: f64,
    pub uniform_random: f64,
    pub nonconvex_monotone: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n: usize,
    pub weights: ArchetypeWeights,
    /// Inclusive range of reasoning depths for k-step subjects.
    pub k_range: (usize, usize),
    /// mu0 drawn uniformly from this interval.
    pub mu0_range: (f64, f64),
    pub belief_gen: BeliefGen,
    /// Constant-increment base response at the first grid position.
    pub ci_base: f64,
    /// Constant-increment raise per grid position.
    pub ci_step: f64,
    /// Mixture over the five precision levels.
    pub noise_weights: [f64; 5],
    pub p_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            n: 106,
            weights: ArchetypeWeights {
                kstep: 0.30,
                constant_increment: 0.25,
                uniform_random: 0.20,
                nonconvex_monotone: 0.25,
            },
            k_range: (1, 4),
            mu0_range: (0.3, 0.7),
            belief_gen: BeliefGen::RandomDirichlet,
            // base > 2.14 * step keeps every grid point above the chord to
            // (1, final value), so the heuristic reads as concave at any
            // interior control abscissa
            ci_base: 0.15,
            ci_step: 0.05,
            noise_weights: [0.05, 0.10, 0.25, 0.30, 0.30],
            p_grid: DEFAULT_P_GRID.to_vec(),
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let wsum = self.weights.kstep
            + self.weights.constant_increment
            + self.weights.uniform_random
            + self.weights.nonconvex_monotone;
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "archetype weights sum to {wsum}, expected 1"
            )));
        }
        if self.p_grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::domain("p-grid values must lie in [0,1]"));
        }
        if self.n == 0 {
            return Err(Error::domain("population size must be positive"));
        }
        let nsum: f64 = self.noise_weights.iter().sum();
        if (nsum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "noise weights sum to {nsum}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchetypeLabel {
    KStep,
    ConstantIncrement,
    UniformRandom,
    NonconvexMonotone,
}

impl std::fmt::Display for ArchetypeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArchetypeLabel::KStep => "kstep",
            ArchetypeLabel::ConstantIncrement => "constant_increment",
            ArchetypeLabel::UniformRandom => "uniform_random",
            ArchetypeLabel::NonconvexMonotone => "nonconvex_monotone",
        };
        f.write_str(s)
    }
}

/// A subject's ground-truth mean strategy.
#[derive(Debug, Clone)]
pub enum MeanCurve {
    /// Structural k-step response curve.
    KStep(KStepPlayer),
    /// Value depends on the grid position, not on p itself.
    PerGridPosition(Vec<f64>),
    /// Flat line at a constant level.
    Constant(f64),
    /// mu0 * p^exponent with exponent in (0,1): increasing, origin, concave.
    Power { mu0: f64, exponent: f64 },
}

impl MeanCurve {
    /// Mean response at grid position `idx` with game parameter `p`.
    pub fn value(&self, idx: usize, p: f64) -> f64 {
        match self {
            MeanCurve::KStep(player) => player.optimal_response(p),
            MeanCurve::PerGridPosition(vals) => vals[idx],
            MeanCurve::Constant(c) => *c,
            MeanCurve::Power { mu0, exponent } => mu0 * p.powf(*exponent),
        }
    }
}

/// One simulated subject with its ground truth.
#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub label: ArchetypeLabel,
    pub curve: MeanCurve,
    pub s: f64,
    pub compliant: bool,
    pub k: Option<usize>,
    pub mu0: Option<f64>,
}

/// Ground-truth sidecar record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub subject_id: String,
    pub archetype: String,
    pub k: Option<usize>,
    pub mu0: Option<f64>,
    pub s: f64,
    pub compliant: bool,
}

/// Belief matrix with each permitted row segment drawn Dirichlet(1,..,1).
pub fn random_belief_matrix<R: Rng>(k: usize, rng: &mut R) -> Result<BeliefMatrix> {
    if k < 2 {
        return Err(Error::domain("random_belief_matrix requires k >= 2"));
    }
    let rows = (1..k)
        .map(|g| {
            // uniform over the simplex on columns 1..=g+1
            let mut row = vec![0.0; k];
            let mut total = 0.0;
            for v in row.iter_mut().take(g + 1) {
                let e = -rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
                *v = e;
                total += e;
            }
            for v in row.iter_mut().take(g + 1) {
                *v /= total;
            }
            row
        })
        .collect();
    BeliefMatrix::new(rows, k)
}

fn sample_archetype<R: Rng>(w: &ArchetypeWeights, rng: &mut R) -> ArchetypeLabel {
    let u = rng.random::<f64>();
    if u < w.kstep {
        ArchetypeLabel::KStep
    } else if u < w.kstep + w.constant_increment {
        ArchetypeLabel::ConstantIncrement
    } else if u < w.kstep + w.constant_increment + w.uniform_random {
        ArchetypeLabel::UniformRandom
    } else {
        ArchetypeLabel::NonconvexMonotone
    }
}

/// Draws the population deterministically from (spec, seed).
pub fn gen_population(spec: &PopulationSpec) -> Result<Vec<Subject>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut subjects = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let label = sample_archetype(&spec.weights, &mut rng);
        let s = S_LEVELS[crate::model::sample_categorical(&spec.noise_weights, &mut rng)];
        let (lo, hi) = spec.mu0_range;
        let mu0 = lo + (hi - lo) * rng.random::<f64>();
        let (curve, compliant, k, mu0_out) = match label {
            ArchetypeLabel::KStep => {
                let k = rng.random_range(spec.k_range.0..=spec.k_range.1);
                let player = if k == 1 {
                    KStepPlayer::level_one(mu0)?
                } else {
                    let beliefs = match spec.belief_gen {
                        BeliefGen::LevelK => BeliefMatrix::level_k(k)?,
                        BeliefGen::ChPoisson { tau } => BeliefMatrix::ch_poisson(k, tau)?,
                        BeliefGen::RandomDirichlet => random_belief_matrix(k, &mut rng)?,
                    };
                    KStepPlayer::new(k, mu0, beliefs)?
                };
                (MeanCurve::KStep(player), true, Some(k), Some(mu0))
            }
            ArchetypeLabel::ConstantIncrement => {
                let vals: Vec<f64> = (0..spec.p_grid.len())
                    .map(|j| (spec.ci_base + j as f64 * spec.ci_step).clamp(0.01, 0.99))
                    .collect();
                (MeanCurve::PerGridPosition(vals), false, None, None)
            }
            ArchetypeLabel::UniformRandom => {
                let level = 0.2 + 0.6 * rng.random::<f64>();
                (MeanCurve::Constant(level), false, None, None)
            }
            ArchetypeLabel::NonconvexMonotone => {
                let exponent = 0.3 + 0.4 * rng.random::<f64>();
                (MeanCurve::Power { mu0, exponent }, false, None, Some(mu0))
            }
        };
        subjects.push(Subject {
            id: format!("s{:03}", i + 1),
            label,
            curve,
            s,
            compliant,
            k,
            mu0: mu0_out,
        });
    }
    Ok(subjects)
}

/// One long-format observation: (subject_id, p, y_raw on the 0-100 scale).
pub type Observation = (String, f64, f64);

/// Beta-noise responses for each subject at each grid position. Returns
/// long-format observations (subject_id, p, y_raw on the 0-100 scale) and
/// the ground-truth sidecar.
pub fn gen_responses(
    subjects: &[Subject],
    spec: &PopulationSpec,
) -> Result<(Vec<Observation>, Vec<TruthRecord>)> {
    spec.validate()?;
    let mut obs = Vec::with_capacity(subjects.len() * spec.p_grid.len());
    let mut truth = Vec::with_capacity(subjects.len());
    for (si, subject) in subjects.iter().enumerate() {
        // per-subject generator so generation parallelizes and reorders
        // without changing draws
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed ^ 0xa076_1d64_78bd_642f_u64.wrapping_mul(si as u64 + 1),
        );
        for (idx, &p) in spec.p_grid.iter().enumerate() {
            let mu = subject.curve.value(idx, p).clamp(1e-6, 1.0 - 1e-6);
            let (a, b) = beta_shapes(mu, subject.s);
            let y = BetaDist::new(a, b).unwrap().sample(&mut rng);
            obs.push((subject.id.clone(), p, 100.0 * y));
        }
        truth.push(TruthRecord {
            subject_id: subject.id.clone(),
            archetype: subject.label.to_string(),
            k: subject.k,
            mu0: subject.mu0,
            s: subject.s,
            compliant: subject.compliant,
        });
    }
    Ok((obs, truth))
}

/// Writes the ground-truth sidecar CSV.
pub fn save_truth(truth: &[TruthRecord], path: &std::path::Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["subject_id", "archetype", "k", "mu0", "s", "compliant_flag"])?;
    for t in truth {
        wtr.write_record([
            t.subject_id.clone(),
            t.archetype.clone(),
            t.k.map_or(String::new(), |k| k.to_string()),
            t.mu0.map_or(String::new(), |m| m.to_string()),
            t.s.to_string(),
            (t.compliant as u8).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the ground-truth sidecar CSV.
pub fn load_truth(path: &std::path::Path) -> Result<Vec<TruthRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").to_string();
        out.push(TruthRecord {
            subject_id: get(0),
            archetype: get(1),
            k: rec.get(2).and_then(|s| s.parse().ok()),
            mu0: rec.get(3).and_then(|s| s.parse().ok()),
            s: rec
                .get(4)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::data("truth sidecar: bad s column"))?,
            compliant: rec.get(5) == Some("1"),
        });
    }
    Ok(out)
}
