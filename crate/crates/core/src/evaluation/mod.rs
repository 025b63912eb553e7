//! Binary classification metrics with malignant as the positive class.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malignant];

    /// Class index in the network output: benign 0, malignant 1.
    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malignant => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Benign),
            1 => Some(Label::Malignant),
            _ => None,
        }
    }

    /// Argmax of a `[p_benign, p_malignant]` pair; ties go to malignant.
    pub fn from_probs(p: [f64; 2]) -> Label {
        if p[1] >= p[0] {
            Label::Malignant
        } else {
            Label::Benign
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Benign => Label::Malignant,
            Label::Malignant => Label::Benign,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malignant => "malignant",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "benign" => Ok(Label::Benign),
            "malignant" => Ok(Label::Malignant),
            _ => Err(format!("unknown label {s:?} (expected benign or malignant)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.tn + self.fp
    }

    /// Counts after exchanging the roles of the two classes.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fn_: self.fp,
            tn: self.tp,
            fp: self.fn_,
        }
    }
}

pub fn confusion(labels: &[Label], preds: &[Label]) -> Result<ConfusionCounts> {
    if labels.len() != preds.len() {
        return Err(Error::shape(format!(
            "{} labels but {} predictions",
            labels.len(),
            preds.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::domain("confusion counts need at least one sample"));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(preds) {
        match (y, p) {
            (Label::Malignant, Label::Malignant) => c.tp += 1,
            (Label::Malignant, Label::Benign) => c.fn_ += 1,
            (Label::Benign, Label::Benign) => c.tn += 1,
            (Label::Benign, Label::Malignant) => c.fp += 1,
        }
    }
    Ok(c)
}

/// Metrics whose denominator was zero; their value is reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Degenerate {
    pub sen: bool,
    pub spe: bool,
    pub ppv: bool,
    pub npv: bool,
    pub acc: bool,
    pub mcc: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.sen || self.spe || self.ppv || self.npv || self.acc || self.mcc
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub sen: f64,
    pub spe: f64,
    pub ppv: f64,
    pub npv: f64,
    pub acc: f64,
    /// `(sen + spe) / 2`, the threshold-bound area.
    pub auc_paper: f64,
    pub mcc: f64,
    /// Ranking ROC area, when scores were available.
    pub roc_auc: Option<f64>,
    pub degenerate: Degenerate,
}

/// Column names in report order.
pub const METRIC_COLUMNS: [&str; 8] = ["ACC", "AUC", "MCC", "SEN", "SPE", "PPV", "NPV", "roc_auc"];

impl MetricsReport {
    /// Values in [`METRIC_COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            Some(self.acc),
            Some(self.auc_paper),
            Some(self.mcc),
            Some(self.sen),
            Some(self.spe),
            Some(self.ppv),
            Some(self.npv),
            self.roc_auc,
        ]
    }
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_from_confusion(c: &ConfusionCounts) -> MetricsReport {
    let mut d = Degenerate::default();
    let sen = ratio(c.tp, c.tp + c.fn_, &mut d.sen);
    let spe = ratio(c.tn, c.tn + c.fp, &mut d.spe);
    let ppv = ratio(c.tp, c.tp + c.fp, &mut d.ppv);
    let npv = ratio(c.tn, c.tn + c.fn_, &mut d.npv);
    let acc = ratio(c.tp + c.tn, c.total(), &mut d.acc);
    let (tp, fn_, tn, fp) = (c.tp as f64, c.fn_ as f64, c.tn as f64, c.fp as f64);
    let den = (tp + fn_) * (tp + fp) * (tn + fn_) * (tn + fp);
    let mcc = if den == 0.0 {
        d.mcc = true;
        0.0
    } else {
        ((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0)
    };
    MetricsReport {
        sen,
        spe,
        ppv,
        npv,
        acc,
        auc_paper: (sen + spe) / 2.0,
        mcc,
        roc_auc: None,
        degenerate: d,
    }
}

/// Probability that a random malignant sample scores above a random benign
/// one, ties counting one half.
pub fn roc_auc(labels: &[Label], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::shape(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::domain("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l == Label::Malignant).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::domain(
            "ROC area is undefined without both classes present",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == Label::Malignant {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Confusion-based metrics plus ranking AUC from malignancy scores. The
/// ranking AUC is left empty when only one class is present.
pub fn evaluate_scores(labels: &[Label], scores: &[f64]) -> Result<MetricsReport> {
    let preds: Vec<Label> = scores
        .iter()
        .map(|&s| {
            if s >= 0.5 {
                Label::Malignant
            } else {
                Label::Benign
            }
        })
        .collect();
    let mut m = metrics_from_confusion(&confusion(labels, &preds)?);
    m.roc_auc = roc_auc(labels, scores).ok();
    Ok(m)
}

/// Per-class shuffled split: `floor(fraction * n_class)` of each class go to
/// train. Returns ascending `(train, test)` index lists.
pub fn stratified_split(
    labels: &[Label],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::param(format!(
            "train fraction must be in [0,1], got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            return Err(Error::domain(format!("no {class} samples to split")));
        }
        idx.shuffle(&mut rng);
        let k = (train_fraction * idx.len() as f64 + 1e-9).floor() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Per-metric mean and sample standard deviation in percent, in
/// [`METRIC_COLUMNS`] order. `roc_auc` is aggregated over the runs that
/// have it and is `None` when none do.
pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<[Option<MeanStd>; 8]> {
    if reports.is_empty() {
        return Err(Error::domain("nothing to aggregate"));
    }
    let mut out = [None; 8];
    for (col, slot) in out.iter_mut().enumerate() {
        let xs: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.values()[col])
            .map(|v| v * 100.0)
            .collect();
        if xs.is_empty() {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        *slot = Some(MeanStd { mean, std });
    }
    Ok(out)
}
