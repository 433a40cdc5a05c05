use rand::Rng;

use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;
use crate::label_space::MultiHot;
use crate::rng;

/// Probability emitted for a confident, correct-side draw.
pub const SATURATION: f64 = 0.99;

/// Confidence spread used unless configured: distances from 0.5 follow
/// `0.49 * Beta(4, 1)`, so most draws sit between 0.85 and 0.99.
pub const DEFAULT_TEMPERATURE: f64 = 0.25;

/// How good a synthetic modality is at each class.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillProfile {
    /// Per class, the probability of landing on the correct side of 0.5.
    pub skills: Vec<f64>,
    /// Spread of the confidence: 0 always saturates, 1 is uniform on
    /// `(0.5, 0.99]`, larger values pull draws toward 0.5.
    pub temperature: f64,
}

impl SkillProfile {
    pub fn new(skills: Vec<f64>, temperature: f64) -> Result<Self> {
        let p = SkillProfile { skills, temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(num_labels: usize, skill: f64, temperature: f64) -> Result<Self> {
        Self::new(vec![skill; num_labels], temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.skills.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Invalid(format!("skill {s} outside [0, 1]")));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Invalid(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }

    /// Parses `label<TAB>skill` lines. A `*<TAB>skill` line sets the skill of
    /// every class not listed; without one, every class must be listed.
    pub fn parse(text: &str, labels: &[String], temperature: f64) -> Result<Self> {
        let mut default = None;
        let mut skills: Vec<Option<f64>> = vec![None; labels.len()];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Parse {
                path: "<skill profile>".into(),
                line: i + 1,
                msg,
            };
            let (label, value) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad("expected `label<TAB>skill`".into()))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad skill `{value}`")))?;
            let label = label.trim();
            if label == "*" {
                default = Some(value);
            } else {
                let idx = labels
                    .binary_search_by(|l| l.as_str().cmp(label))
                    .ok()
                    .or_else(|| labels.iter().position(|l| l == label))
                    .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
                skills[idx] = Some(value);
            }
        }
        let skills = skills
            .into_iter()
            .zip(labels)
            .map(|(s, l)| {
                s.or(default)
                    .ok_or_else(|| Error::Invalid(format!("skill profile does not cover class `{l}`")))
            })
            .collect::<Result<_>>()?;
        Self::new(skills, temperature)
    }
}

/// Scores `truth` as a modality with the given skill would. Each entry lands
/// on the correct side of 0.5 with probability `skill[c]` and on the wrong
/// side otherwise; its distance from 0.5 is `0.49 * u^temperature` with `u`
/// uniform on `(0, 1]`. Draws come from the `synth:<modality>` stream.
pub fn generate_synthetic_modality(
    modality: &str,
    ids: &[String],
    truth: &[MultiHot],
    profile: &SkillProfile,
    seed: u64,
) -> Result<PredictionMatrix> {
    profile.validate()?;
    let l = profile.skills.len();
    if ids.len() != truth.len() {
        return Err(Error::Shape(format!("{} ids for {} truth rows", ids.len(), truth.len())));
    }
    if let Some(t) = truth.iter().find(|t| t.len() != l) {
        return Err(Error::Shape(format!("profile covers {l} classes, truth rows have {}", t.len())));
    }
    let mut rng = rng::stream(seed, &format!("{}:{modality}", rng::SYNTH));
    let mut values = Vec::with_capacity(truth.len() * l);
    for t in truth {
        for (&bit, &skill) in t.bits().iter().zip(&profile.skills) {
            let correct = rng.gen::<f64>() < skill;
            let u = 1.0 - rng.gen::<f64>();
            let confidence = 0.5 + (SATURATION - 0.5) * u.powf(profile.temperature);
            values.push(if correct == bit { confidence } else { 1.0 - confidence });
        }
    }
    PredictionMatrix::new(modality, ids.to_vec(), l, values)
}

/// Random label sets: each class independently with probability
/// `prevalence`, and one uniformly chosen class when a row comes out empty.
pub fn synthetic_truth(n: usize, num_labels: usize, prevalence: f64, seed: u64) -> Result<Vec<MultiHot>> {
    if num_labels == 0 || !(0.0..=1.0).contains(&prevalence) {
        return Err(Error::Invalid("need at least one label and prevalence in [0, 1]".into()));
    }
    let mut rng = rng::stream(seed, &format!("{}:truth", rng::SYNTH));
    Ok((0..n)
        .map(|_| {
            let mut row: MultiHot = (0..num_labels)
                .map(|_| rng.gen::<f64>() < prevalence)
                .collect::<Vec<bool>>()
                .into();
            if row.count_ones() == 0 {
                row.set(rng.gen_range(0..num_labels), true);
            }
            row
        })
        .collect())
}
