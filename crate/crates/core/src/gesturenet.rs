//! Flex-glove gesture recognition.
//!
//! Raw flex readings are calibrated per user onto 0..180 degree bend
//! angles, then classified by a 5-20-8 sigmoid perceptron trained with
//! plain backpropagation on a squared-error loss.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const INPUT_DIM: usize = 5;
pub const HIDDEN_DIM: usize = 20;
pub const OUTPUT_DIM: usize = 8;
pub const MAX_ANGLE: f64 = 180.0;

pub const FINGER_NAMES: [&str; INPUT_DIM] = ["thumb", "index", "middle", "ring", "little"];

pub type Angles = [f64; INPUT_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureLabel {
    Palm,
    Gun,
    Ok,
    CallMe,
    Rock,
    Fist,
    ThumbUp,
    IndexUp,
}

impl GestureLabel {
    /// Class order of the network outputs.
    pub const ALL: [GestureLabel; OUTPUT_DIM] = [
        GestureLabel::Palm,
        GestureLabel::Gun,
        GestureLabel::Ok,
        GestureLabel::CallMe,
        GestureLabel::Rock,
        GestureLabel::Fist,
        GestureLabel::ThumbUp,
        GestureLabel::IndexUp,
    ];

    /// Row order of the recognition-rate report.
    pub const REPORT_ORDER: [GestureLabel; OUTPUT_DIM] = [
        GestureLabel::Palm,
        GestureLabel::Ok,
        GestureLabel::ThumbUp,
        GestureLabel::IndexUp,
        GestureLabel::Rock,
        GestureLabel::CallMe,
        GestureLabel::Gun,
        GestureLabel::Fist,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn display_name(self) -> &'static str {
        match self {
            GestureLabel::Palm => "Palm",
            GestureLabel::Gun => "Gun",
            GestureLabel::Ok => "Ok",
            GestureLabel::CallMe => "Call me",
            GestureLabel::Rock => "Rock",
            GestureLabel::Fist => "Fist",
            GestureLabel::ThumbUp => "Thumb up",
            GestureLabel::IndexUp => "Index up",
        }
    }

    /// Canonical bend angles (thumb..little) used by the synthetic glove.
    pub fn prototype(self) -> Angles {
        const OPEN: f64 = 10.0;
        const BENT: f64 = 170.0;
        match self {
            GestureLabel::Palm => [OPEN, OPEN, OPEN, OPEN, OPEN],
            GestureLabel::Gun => [OPEN, OPEN, BENT, BENT, BENT],
            GestureLabel::Ok => [100.0, 100.0, 15.0, 15.0, 15.0],
            GestureLabel::CallMe => [OPEN, BENT, BENT, BENT, OPEN],
            GestureLabel::Rock => [BENT, OPEN, BENT, BENT, OPEN],
            GestureLabel::Fist => [BENT, BENT, BENT, BENT, BENT],
            GestureLabel::ThumbUp => [OPEN, BENT, BENT, BENT, BENT],
            GestureLabel::IndexUp => [BENT, OPEN, BENT, BENT, BENT],
        }
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|g| format!("{g:?}").to_lowercase() == key)
            .ok_or_else(|| invalid(format!("unknown gesture label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GloveSample {
    pub raw: [f64; INPUT_DIM],
    pub angles: Angles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    /// Per-finger `(raw_min, raw_max)`: open palm and fist readings.
    pub ranges: [(f64, f64); INPUT_DIM],
}

/// Builds the per-finger map sending the open-palm reading to 0 degrees
/// and the fist reading to 180.
pub fn calibrate(open_palm_raw: &[f64; INPUT_DIM], fist_raw: &[f64; INPUT_DIM]) -> Result<CalibrationMap> {
    let mut ranges = [(0.0, 0.0); INPUT_DIM];
    for i in 0..INPUT_DIM {
        let (lo, hi) = (open_palm_raw[i], fist_raw[i]);
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::Calibration {
                finger: FINGER_NAMES[i],
                raw_min: lo,
                raw_max: hi,
            });
        }
        ranges[i] = (lo, hi);
    }
    Ok(CalibrationMap { ranges })
}

impl CalibrationMap {
    /// Maps raw readings to angles, clamping to [0, 180].
    pub fn apply(&self, raw: &[f64; INPUT_DIM]) -> GloveSample {
        let mut angles = [0.0; INPUT_DIM];
        for (i, a) in angles.iter_mut().enumerate() {
            let (lo, hi) = self.ranges[i];
            *a = (MAX_ANGLE * ((raw[i] - lo) / (hi - lo))).clamp(0.0, MAX_ANGLE);
        }
        GloveSample { raw: *raw, angles }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// One update per sample, samples in dataset order.
    #[default]
    PerSample,
    /// One averaged update per pass over the dataset.
    PerEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub loops: u64,
    pub learning_rate: f64,
    pub update_mode: UpdateMode,
}

pub const MODEL_FORMAT: &str = "huegrip-mlp/1";

/// The 5-20-8 perceptron. Weight rows are indexed by the receiving unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub activation: String,
    pub training: Option<TrainingMeta>,
    pub hidden_weights: [[f64; INPUT_DIM]; HIDDEN_DIM],
    pub hidden_bias: [f64; HIDDEN_DIM],
    pub output_weights: [[f64; HIDDEN_DIM]; OUTPUT_DIM],
    pub output_bias: [f64; OUTPUT_DIM],
}

/// Activations of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forward {
    pub input: Angles,
    pub hidden: [f64; HIDDEN_DIM],
    pub scores: [f64; OUTPUT_DIM],
}

/// Gradients with the same layout as [`MlpModel`]'s parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradients {
    pub hidden_weights: [[f64; INPUT_DIM]; HIDDEN_DIM],
    pub hidden_bias: [f64; HIDDEN_DIM],
    pub output_weights: [[f64; HIDDEN_DIM]; OUTPUT_DIM],
    pub output_bias: [f64; OUTPUT_DIM],
}

impl Default for Gradients {
    fn default() -> Self {
        Self {
            hidden_weights: [[0.0; INPUT_DIM]; HIDDEN_DIM],
            hidden_bias: [0.0; HIDDEN_DIM],
            output_weights: [[0.0; HIDDEN_DIM]; OUTPUT_DIM],
            output_bias: [0.0; OUTPUT_DIM],
        }
    }
}

impl Gradients {
    /// Parameters in the order of [`MlpModel::params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.hidden_weights.iter().flatten().copied().collect();
        v.extend(self.hidden_bias);
        v.extend(self.output_weights.iter().flatten());
        v.extend(self.output_bias);
        v
    }

    fn add_scaled(&mut self, other: &Gradients, k: f64) {
        for (a, b) in self.hidden_weights.iter_mut().zip(&other.hidden_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += k * y;
            }
        }
        for (x, y) in self.hidden_bias.iter_mut().zip(&other.hidden_bias) {
            *x += k * y;
        }
        for (a, b) in self.output_weights.iter_mut().zip(&other.output_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += k * y;
            }
        }
        for (x, y) in self.output_bias.iter_mut().zip(&other.output_bias) {
            *x += k * y;
        }
    }
}

/// One-hot target vector for a label.
pub fn one_hot(label: GestureLabel) -> [f64; OUTPUT_DIM] {
    let mut t = [0.0; OUTPUT_DIM];
    t[label.index()] = 1.0;
    t
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    pub fn zeros() -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            input_dim: INPUT_DIM,
            hidden_dim: HIDDEN_DIM,
            output_dim: OUTPUT_DIM,
            activation: "sigmoid".into(),
            training: None,
            hidden_weights: [[0.0; INPUT_DIM]; HIDDEN_DIM],
            hidden_bias: [0.0; HIDDEN_DIM],
            output_weights: [[0.0; HIDDEN_DIM]; OUTPUT_DIM],
            output_bias: [0.0; OUTPUT_DIM],
        }
    }

    /// Uniform initialisation in [-0.5, 0.5].
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros();
        for p in m.params_mut() {
            *p = rng.random_range(-0.5..=0.5);
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unknown model format {:?}", self.format)));
        }
        if (self.input_dim, self.hidden_dim, self.output_dim) != (INPUT_DIM, HIDDEN_DIM, OUTPUT_DIM) {
            return Err(Error::Format(format!(
                "model dimensions {}-{}-{} differ from {INPUT_DIM}-{HIDDEN_DIM}-{OUTPUT_DIM}",
                self.input_dim, self.hidden_dim, self.output_dim
            )));
        }
        if self.activation != "sigmoid" {
            return Err(Error::Format(format!("unsupported activation {:?}", self.activation)));
        }
        if self.params().any(|p| !p.is_finite()) {
            return Err(Error::Format("model holds non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.hidden_weights
            .iter()
            .flatten()
            .chain(&self.hidden_bias)
            .chain(self.output_weights.iter().flatten())
            .chain(&self.output_bias)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.hidden_weights
            .iter_mut()
            .flatten()
            .chain(&mut self.hidden_bias)
            .chain(self.output_weights.iter_mut().flatten())
            .chain(&mut self.output_bias)
    }

    pub fn forward(&self, angles: &Angles) -> Result<Forward> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(invalid("gesture input angles must be finite"));
        }
        Ok(self.forward_unchecked(angles))
    }

    fn forward_unchecked(&self, angles: &Angles) -> Forward {
        let input = angles.map(|a| a / MAX_ANGLE);
        let mut hidden = [0.0; HIDDEN_DIM];
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &self.hidden_weights[j];
            let z: f64 = self.hidden_bias[j] + w.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>();
            *h = sigmoid(z);
        }
        let mut scores = [0.0; OUTPUT_DIM];
        for (k, o) in scores.iter_mut().enumerate() {
            let w = &self.output_weights[k];
            let z: f64 = self.output_bias[k] + w.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
            *o = sigmoid(z);
        }
        Forward {
            input,
            hidden,
            scores,
        }
    }

    /// Predicted class; ties go to the lowest class index.
    pub fn classify(&self, angles: &Angles) -> Result<GestureLabel> {
        let f = self.forward(angles)?;
        Ok(GestureLabel::ALL[argmax(&f.scores)])
    }

    /// Half the squared error against the one-hot target.
    pub fn loss(&self, angles: &Angles, label: GestureLabel) -> f64 {
        let f = self.forward_unchecked(angles);
        let t = one_hot(label);
        0.5 * f.scores.iter().zip(&t).map(|(o, t)| (o - t).powi(2)).sum::<f64>()
    }

    /// Backpropagated gradient of [`MlpModel::loss`].
    pub fn gradients(&self, angles: &Angles, label: GestureLabel) -> Gradients {
        let f = self.forward_unchecked(angles);
        let t = one_hot(label);
        let mut g = Gradients::default();
        let mut delta_out = [0.0; OUTPUT_DIM];
        for k in 0..OUTPUT_DIM {
            let o = f.scores[k];
            delta_out[k] = (o - t[k]) * o * (1.0 - o);
            g.output_bias[k] = delta_out[k];
            for j in 0..HIDDEN_DIM {
                g.output_weights[k][j] = delta_out[k] * f.hidden[j];
            }
        }
        for j in 0..HIDDEN_DIM {
            let back: f64 = (0..OUTPUT_DIM).map(|k| delta_out[k] * self.output_weights[k][j]).sum();
            let h = f.hidden[j];
            let delta = back * h * (1.0 - h);
            g.hidden_bias[j] = delta;
            for i in 0..INPUT_DIM {
                g.hidden_weights[j][i] = delta * f.input[i];
            }
        }
        g
    }

    fn apply(&mut self, g: &Gradients, learning_rate: f64) {
        for (w, d) in self.hidden_weights.iter_mut().zip(&g.hidden_weights) {
            for (x, y) in w.iter_mut().zip(d) {
                *x -= learning_rate * y;
            }
        }
        for (x, y) in self.hidden_bias.iter_mut().zip(&g.hidden_bias) {
            *x -= learning_rate * y;
        }
        for (w, d) in self.output_weights.iter_mut().zip(&g.output_weights) {
            for (x, y) in w.iter_mut().zip(d) {
                *x -= learning_rate * y;
            }
        }
        for (x, y) in self.output_bias.iter_mut().zip(&g.output_bias) {
            *x -= learning_rate * y;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Anything that maps bend angles to a gesture.
pub trait GestureClassifier {
    fn classify_angles(&self, angles: &Angles) -> Result<GestureLabel>;
}

impl GestureClassifier for MlpModel {
    fn classify_angles(&self, angles: &Angles) -> Result<GestureLabel> {
        self.classify(angles)
    }
}

/// Nearest-prototype rule: the synthetic glove's own ground truth.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrototypeClassifier;

impl GestureClassifier for PrototypeClassifier {
    fn classify_angles(&self, angles: &Angles) -> Result<GestureLabel> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(invalid("gesture input angles must be finite"));
        }
        let dist = |g: GestureLabel| -> f64 {
            g.prototype().iter().zip(angles).map(|(p, a)| (p - a).powi(2)).sum()
        };
        let mut best = GestureLabel::ALL[0];
        for g in GestureLabel::ALL {
            if dist(g) < dist(best) {
                best = g;
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub angles: Angles,
    pub label: GestureLabel,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    thumb: f64,
    index: f64,
    middle: f64,
    ring: f64,
    little: f64,
    label: String,
}

pub fn write_dataset_csv<W: Write>(samples: &[LabeledSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        let [thumb, index, middle, ring, little] = s.angles;
        w.serialize(CsvRow {
            thumb,
            index,
            middle,
            ring,
            little,
            label: s.label.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<LabeledSample>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: CsvRow = row?;
        let angles = [row.thumb, row.index, row.middle, row.ring, row.little];
        if angles.iter().any(|a| !a.is_finite() || !(0.0..=MAX_ANGLE).contains(a)) {
            return Err(invalid(format!("angles {angles:?} outside [0, 180]")));
        }
        out.push(LabeledSample {
            angles,
            label: row.label.parse()?,
        });
    }
    Ok(out)
}

/// Shape of a synthetic glove dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub users: usize,
    pub repetitions: usize,
    /// Standard deviation of each bend angle around its prototype.
    pub spread_deg: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 20,
            repetitions: 3,
            spread_deg: 5.0,
        }
    }
}

impl SyntheticSpec {
    pub fn samples_per_user(&self) -> usize {
        self.repetitions * OUTPUT_DIM
    }
}

/// Per-gesture Gaussian clusters, user-major, clamped to [0, 180].
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<LabeledSample>> {
    let noise = Normal::new(0.0, spec.spread_deg)
        .map_err(|e| invalid(format!("bad spread {}: {e}", spec.spread_deg)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.users * spec.samples_per_user());
    for _user in 0..spec.users {
        for _rep in 0..spec.repetitions {
            for label in GestureLabel::ALL {
                let angles = label
                    .prototype()
                    .map(|p| (p + noise.sample(&mut rng)).clamp(0.0, MAX_ANGLE));
                out.push(LabeledSample { angles, label });
            }
        }
    }
    Ok(out)
}

/// Splits a user-major synthetic set, holding out the last `test_users`.
pub fn split_by_user(
    samples: &[LabeledSample],
    spec: &SyntheticSpec,
    test_users: usize,
) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let cut = spec.users.saturating_sub(test_users) * spec.samples_per_user();
    let cut = cut.min(samples.len());
    (samples[..cut].to_vec(), samples[cut..].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loops: u64,
    pub learning_rate: f64,
    pub seed: u64,
    pub update_mode: UpdateMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loops: 100_000,
            learning_rate: 5.0e-4,
            seed: 0,
            update_mode: UpdateMode::PerSample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub loop_index: u64,
    pub accuracy: f64,
    /// Mean training loss.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub curve: Vec<Checkpoint>,
    pub warnings: Vec<String>,
}

fn accuracy(model: &MlpModel, samples: &[LabeledSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| argmax(&model.forward_unchecked(&s.angles).scores) == s.label.index())
        .count();
    hits as f64 / samples.len() as f64
}

fn mean_loss(model: &MlpModel, samples: &[LabeledSample]) -> f64 {
    samples.iter().map(|s| model.loss(&s.angles, s.label)).sum::<f64>() / samples.len() as f64
}

fn distinct_labels(samples: &[LabeledSample]) -> usize {
    let mut seen = [false; OUTPUT_DIM];
    for s in samples {
        seen[s.label.index()] = true;
    }
    seen.iter().filter(|b| **b).count()
}

/// Loop indices at which accuracy is sampled: every `loops / 10`.
pub fn checkpoint_loops(loops: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (1..=10).map(|k| k * loops / 10).filter(|l| *l > 0).collect();
    v.dedup();
    v
}

/// Trains from a seeded initialisation. Accuracy is measured on
/// `heldout` (or on `train` when `heldout` is empty) at each checkpoint.
pub fn train(train: &[LabeledSample], heldout: &[LabeledSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if cfg.loops == 0 {
        return Err(invalid("loops must be > 0"));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(invalid("learning rate must be finite and >= 0"));
    }
    if let Some(s) = train.iter().chain(heldout).find(|s| s.angles.iter().any(|a| !a.is_finite())) {
        return Err(invalid(format!("non-finite sample {:?}", s.angles)));
    }
    let mut warnings = Vec::new();
    if distinct_labels(train) < 2 {
        let w = "training set holds a single class; accuracy is trivial".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    let eval_set = if heldout.is_empty() { train } else { heldout };
    let checkpoints = checkpoint_loops(cfg.loops);
    let mut next_cp = 0;

    let mut model = MlpModel::random(cfg.seed);
    let mut curve = Vec::with_capacity(checkpoints.len());
    for l in 1..=cfg.loops {
        match cfg.update_mode {
            UpdateMode::PerSample => {
                for s in train {
                    let g = model.gradients(&s.angles, s.label);
                    model.apply(&g, cfg.learning_rate);
                }
            }
            UpdateMode::PerEpoch => {
                let mut acc = Gradients::default();
                let k = 1.0 / train.len() as f64;
                for s in train {
                    acc.add_scaled(&model.gradients(&s.angles, s.label), k);
                }
                model.apply(&acc, cfg.learning_rate);
            }
        }
        if next_cp < checkpoints.len() && l == checkpoints[next_cp] {
            curve.push(Checkpoint {
                loop_index: l,
                accuracy: accuracy(&model, eval_set),
                loss: mean_loss(&model, train),
            });
            next_cp += 1;
        }
    }
    model.training = Some(TrainingMeta {
        seed: cfg.seed,
        loops: cfg.loops,
        learning_rate: cfg.learning_rate,
        update_mode: cfg.update_mode,
    });
    Ok(TrainOutcome {
        model,
        curve,
        warnings,
    })
}

pub fn write_curve_csv<W: Write>(curve: &[Checkpoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["loop", "accuracy", "loss"])?;
    for c in curve {
        w.write_record([c.loop_index.to_string(), c.accuracy.to_string(), c.loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRate {
    pub label: GestureLabel,
    pub correct: usize,
    pub total: usize,
    /// `None` when the class has no samples.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// One row per gesture in report order.
    pub rows: Vec<ClassRate>,
    /// Mean of the per-class rates over classes that have samples.
    pub average: Option<f64>,
    pub trivial: bool,
}

pub fn evaluate<C: GestureClassifier + ?Sized>(model: &C, dataset: &[LabeledSample]) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(invalid("evaluation set is empty"));
    }
    let mut correct = [0usize; OUTPUT_DIM];
    let mut total = [0usize; OUTPUT_DIM];
    for s in dataset {
        total[s.label.index()] += 1;
        if model.classify_angles(&s.angles)? == s.label {
            correct[s.label.index()] += 1;
        }
    }
    let rows: Vec<ClassRate> = GestureLabel::REPORT_ORDER
        .iter()
        .map(|&label| {
            let i = label.index();
            ClassRate {
                label,
                correct: correct[i],
                total: total[i],
                rate: (total[i] > 0).then(|| correct[i] as f64 / total[i] as f64),
            }
        })
        .collect();
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
    let trivial = rates.len() < 2;
    if trivial {
        log::warn!("evaluation set holds a single class; accuracy is trivial");
    }
    Ok(EvalReport {
        average: Some(rates.iter().sum::<f64>() / rates.len() as f64),
        rows,
        trivial,
    })
}

fn percent(rate: Option<f64>) -> String {
    rate.map_or_else(|| "n/a".to_string(), |r| format!("{:.2}%", 100.0 * r))
}

impl EvalReport {
    /// Recognition-rate table: one row per gesture plus an average row.
    pub fn write_csv<W: Write>(&self, column: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["Gesture", column])?;
        for r in &self.rows {
            w.write_record([r.label.display_name().to_string(), percent(r.rate)])?;
        }
        w.write_record(["Average".to_string(), percent(self.average)])?;
        w.flush()?;
        Ok(())
    }
}
