//! Synthetic dataset generation.
//!
//! The clinical recordings behind this pipeline are not redistributable, so
//! tests and demos run on generated stand-ins: independent Gaussian draws
//! per feature with per-class means and standard deviations, clamped into
//! each feature kind's legal range and renormalized where percentages must
//! form a complete laterality triple.
//!
//! Generation is bit-deterministic: every record derives its own RNG stream
//! from the profile seed and the record's position, so records could be
//! drawn in parallel without changing a single value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{AgeBand, Dataset, FeatureKind, FeatureSchema, Label, SampleRecord};
use crate::error::{Error, Result};
use crate::seeds;

/// Per-leg base distribution for the canonical schema: (name, mean, sd).
/// Both classes start from these values; profiles shift them apart.
const BASE_LEG_DISTRIBUTIONS: [(&str, f64, f64); 10] = [
    ("movements_per_awake_hour", 180.0, 25.0),
    ("pct_unilateral", 50.0, 5.0),
    ("pct_bilateral_sync", 20.0, 4.0),
    ("pct_bilateral_async", 30.0, 4.0),
    ("mean_duration", 0.42, 0.07),
    ("sd_duration", 0.26, 0.05),
    ("mean_avg_accel", 2.4, 0.4),
    ("sd_avg_accel", 0.85, 0.15),
    ("mean_peak_accel", 4.2, 0.6),
    ("sd_peak_accel", 1.3, 0.2),
];

/// Signed signal strength per canonical feature, as a fraction of the
/// requested separation. Positive means the TD mean sits above the AR mean.
/// The right-leg mean acceleration carries the full signal; several other
/// features move with it at reduced strength so multivariate learners see
/// more than one informative column.
const CENSUS_SIGNAL: [(&str, f64); 14] = [
    ("mean_avg_accel_r", 1.0),
    ("mean_avg_accel_l", 0.7),
    ("movements_per_awake_hour_r", 0.8),
    ("movements_per_awake_hour_l", 0.6),
    ("mean_peak_accel_r", 0.6),
    ("mean_peak_accel_l", 0.45),
    ("sd_avg_accel_r", 0.3),
    ("sd_avg_accel_l", 0.2),
    ("pct_unilateral_r", -0.5),
    ("pct_unilateral_l", -0.4),
    ("pct_bilateral_sync_r", 0.35),
    ("pct_bilateral_sync_l", 0.3),
    ("mean_duration_r", -0.25),
    ("mean_duration_l", -0.2),
];

/// Recipe for one synthetic dataset: a schema, an age band, per-class
/// Gaussian parameters for every feature, class counts, and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct GeneratorProfile {
    schema: FeatureSchema,
    band: AgeBand,
    n_td: usize,
    n_ar: usize,
    td_means: Vec<f64>,
    td_sds: Vec<f64>,
    ar_means: Vec<f64>,
    ar_sds: Vec<f64>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawProfile {
    schema: FeatureSchema,
    band: AgeBand,
    n_td: usize,
    n_ar: usize,
    td_means: Vec<f64>,
    td_sds: Vec<f64>,
    ar_means: Vec<f64>,
    ar_sds: Vec<f64>,
    seed: u64,
}

impl TryFrom<RawProfile> for GeneratorProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<GeneratorProfile> {
        GeneratorProfile::custom(
            raw.schema,
            raw.band,
            raw.n_td,
            raw.n_ar,
            (raw.td_means, raw.td_sds),
            (raw.ar_means, raw.ar_sds),
            raw.seed,
        )
    }
}

impl GeneratorProfile {
    /// Fully specified profile. Each `(means, sds)` pair runs parallel to
    /// the schema.
    pub fn custom(
        schema: FeatureSchema,
        band: AgeBand,
        n_td: usize,
        n_ar: usize,
        td: (Vec<f64>, Vec<f64>),
        ar: (Vec<f64>, Vec<f64>),
        seed: u64,
    ) -> Result<GeneratorProfile> {
        if band == AgeBand::Unbanded {
            return Err(Error::InvalidParam(
                "generation needs a bounded age band to draw ages from".into(),
            ));
        }
        if n_td == 0 || n_ar == 0 {
            return Err(Error::InvalidParam(format!(
                "generation needs at least one record per class, got {n_td} TD / {n_ar} AR"
            )));
        }
        let d = schema.len();
        let (td_means, td_sds) = td;
        let (ar_means, ar_sds) = ar;
        for (what, v) in [
            ("td_means", &td_means),
            ("td_sds", &td_sds),
            ("ar_means", &ar_means),
            ("ar_sds", &ar_sds),
        ] {
            if v.len() != d {
                return Err(Error::InvalidParam(format!(
                    "{what} has {} entries for a {d}-feature schema",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParam(format!("{what} contains a non-finite value")));
            }
        }
        for (what, v) in [("td_sds", &td_sds), ("ar_sds", &ar_sds)] {
            if v.iter().any(|x| *x < 0.0) {
                return Err(Error::InvalidParam(format!("{what} contains a negative sd")));
            }
        }
        Ok(GeneratorProfile {
            schema,
            band,
            n_td,
            n_ar,
            td_means,
            td_sds,
            ar_means,
            ar_sds,
            seed,
        })
    }

    /// Canonical-schema profile with identical class distributions: pure
    /// noise relative to the label.
    pub fn neutral(band: AgeBand, n_td: usize, n_ar: usize, seed: u64) -> Result<GeneratorProfile> {
        let schema = FeatureSchema::canonical();
        let mut means = Vec::with_capacity(schema.len());
        let mut sds = Vec::with_capacity(schema.len());
        for name in schema.names() {
            let base = name
                .rsplit_once('_')
                .and_then(|(base, _)| {
                    BASE_LEG_DISTRIBUTIONS.iter().find(|(n, _, _)| *n == base)
                })
                .expect("canonical names all have base distributions");
            means.push(base.1);
            sds.push(base.2);
        }
        GeneratorProfile::custom(
            schema,
            band,
            n_td,
            n_ar,
            (means.clone(), sds.clone()),
            (means, sds),
            seed,
        )
    }

    /// Overrides one feature's class means and shared sd.
    pub fn with_feature(
        mut self,
        name: &str,
        td_mean: f64,
        ar_mean: f64,
        sd: f64,
    ) -> Result<GeneratorProfile> {
        let i = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        if !td_mean.is_finite() || !ar_mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(Error::InvalidParam(format!(
                "feature `{name}` needs finite means and a non-negative sd"
            )));
        }
        self.td_means[i] = td_mean;
        self.ar_means[i] = ar_mean;
        self.td_sds[i] = sd;
        self.ar_sds[i] = sd;
        Ok(self)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn band(&self) -> AgeBand {
        self.band
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.n_td, self.n_ar)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn class_params(&self, label: Label) -> (&[f64], &[f64]) {
        match label {
            Label::Td => (&self.td_means, &self.td_sds),
            Label::Ar => (&self.ar_means, &self.ar_sds),
        }
    }
}

fn age_range(band: AgeBand) -> (f64, f64) {
    match band {
        AgeBand::ZeroToSix => (0.5, 6.0),
        AgeBand::SixToTwelve => (6.0, 12.0),
        AgeBand::Unbanded => unreachable!("profiles reject the unbanded case"),
    }
}

/// Visit number encodes the band so fixtures from both bands can merge into
/// one file without colliding on (infant, visit).
fn visit_for(band: AgeBand) -> u32 {
    match band {
        AgeBand::ZeroToSix => 1,
        _ => 2,
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        mean
    } else {
        Normal::new(mean, sd).expect("validated sd").sample(rng)
    }
}

/// Draws one dataset from the profile. Every record satisfies the full
/// record invariant set by construction: values are clamped into their
/// kind's range and laterality triples are rescaled to sum to 100.
pub fn generate(profile: &GeneratorProfile) -> Result<Dataset> {
    let schema = profile.schema();
    let kinds = schema.kinds();
    let triples = schema.laterality_triples();
    let (lo, hi) = age_range(profile.band());
    let visit = visit_for(profile.band());
    let (n_td, n_ar) = profile.counts();

    let mut records = Vec::with_capacity(n_td + n_ar);
    let mut class_index = [0usize; 2];
    for global in 0..n_td + n_ar {
        let label = if global < n_td { Label::Td } else { Label::Ar };
        let slot = if label == Label::Td { 0 } else { 1 };
        class_index[slot] += 1;
        let (means, sds) = profile.class_params(label);

        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(profile.seed(), global as u64));
        let age_months = rng.gen_range(lo..hi);
        let awake_hours = rng.gen_range(6.0..10.0);
        let mut features: Vec<f64> = (0..schema.len())
            .map(|i| {
                let v = draw(&mut rng, means[i], sds[i]);
                match kinds[i] {
                    FeatureKind::Percent => v.clamp(0.0, 100.0),
                    _ => v.max(0.0),
                }
            })
            .collect();
        for triple in &triples {
            let sum: f64 = triple.iter().map(|&i| features[i]).sum();
            if sum > 1e-9 {
                for &i in triple {
                    // The rescale can overshoot 100 by an ulp; clamp again.
                    features[i] = (features[i] * 100.0 / sum).clamp(0.0, 100.0);
                }
            } else {
                // All three shares collapsed to zero; split evenly.
                for &i in triple {
                    features[i] = 100.0 / 3.0;
                }
            }
        }

        records.push(SampleRecord {
            infant_id: format!("{}{:02}", label.as_str().to_ascii_lowercase(), class_index[slot]),
            visit_index: visit,
            age_months,
            label,
            aims_score: None,
            awake_hours: Some(awake_hours),
            features,
        });
    }
    Dataset::new(schema.clone(), records, profile.band())
}

/// Profile matching the study's per-band cohort sizes (16 TD / 15 AR under
/// six months, 23 TD / 38 AR from six to twelve), with the classes pulled
/// apart by `separation` standard deviations along the signal features.
pub fn census_profile(band: AgeBand, separation: f64, seed: u64) -> Result<GeneratorProfile> {
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::InvalidParam(format!(
            "separation must be a non-negative number of sds, got {separation}"
        )));
    }
    let (n_td, n_ar) = match band {
        AgeBand::ZeroToSix => (16, 15),
        AgeBand::SixToTwelve => (23, 38),
        AgeBand::Unbanded => {
            return Err(Error::InvalidParam(
                "census counts are defined per age band".into(),
            ))
        }
    };
    let mut profile = GeneratorProfile::neutral(band, n_td, n_ar, seed)?;
    for (name, strength) in CENSUS_SIGNAL {
        let i = profile.schema.index_of(name).expect("canonical name");
        let sd = profile.td_sds[i];
        let shift = strength * separation * sd / 2.0;
        profile.td_means[i] += shift;
        profile.ar_means[i] -= shift;
    }
    Ok(profile)
}

/// Generated dataset with the study's per-band class counts.
pub fn census_fixture(band: AgeBand, separation: f64, seed: u64) -> Result<Dataset> {
    generate(&census_profile(band, separation, seed)?)
}

/// 16 TD / 15 AR fixture whose only signal is the right-leg mean
/// acceleration: TD centers at 3.0, AR at 1.5, both with sd 0.2. The 7.5-sd
/// gap makes a single threshold near 2.25 separate the classes, so a fitted
/// tree should reduce to one split with TD on the high side.
pub fn accel_split_fixture(seed: u64) -> Result<Dataset> {
    let profile = GeneratorProfile::neutral(AgeBand::ZeroToSix, 16, 15, seed)?
        .with_feature("mean_avg_accel_r", 3.0, 1.5, 0.2)?;
    generate(&profile)
}
