//! Detector evaluation: correctness labelling, AUROC, Pearson correlation and
//! G-Mean operating thresholds.
//!
//! The positive class is always "hallucination" (an incorrect answer). Every
//! metric declares an [`Orientation`]; scores are flipped where needed so that
//! larger oriented scores mean "more likely hallucinating" before any ROC
//! quantity is computed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rouge::rouge_l;
use crate::trace::GenerationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectnessKind {
    RougeL,
    EmbeddingSimilarity,
    ExactMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessMeasure {
    pub kind: CorrectnessKind,
    pub threshold: f64,
}

impl CorrectnessMeasure {
    pub fn rouge_l(threshold: f64) -> Self {
        Self {
            kind: CorrectnessKind::RougeL,
            threshold,
        }
    }

    pub fn embedding_similarity(threshold: f64) -> Self {
        Self {
            kind: CorrectnessKind::EmbeddingSimilarity,
            threshold,
        }
    }

    pub fn exact_match() -> Self {
        Self {
            kind: CorrectnessKind::ExactMatch,
            threshold: 1.0,
        }
    }

    /// Short name used in report headers.
    pub fn label(&self) -> String {
        match self.kind {
            CorrectnessKind::RougeL => format!("rouge_l >= {}", self.threshold),
            CorrectnessKind::EmbeddingSimilarity => format!("similarity >= {}", self.threshold),
            CorrectnessKind::ExactMatch => "exact_match".into(),
        }
    }

    fn auroc_column(&self) -> &'static str {
        match self.kind {
            CorrectnessKind::RougeL => "AUROC_r",
            CorrectnessKind::EmbeddingSimilarity => "AUROC_s",
            CorrectnessKind::ExactMatch => "AUROC_em",
        }
    }
}

impl Default for CorrectnessMeasure {
    fn default() -> Self {
        Self::rouge_l(0.5)
    }
}

/// Parses `rouge[:θ]`, `sim[:θ]` or `em`.
impl std::str::FromStr for CorrectnessMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, threshold) = match s.split_once(':') {
            Some((k, t)) => (
                k,
                Some(t.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("bad correctness threshold `{t}`"))
                })?),
            ),
            None => (s, None),
        };
        let measure = match (kind, threshold) {
            ("rouge" | "rouge_l", t) => Self::rouge_l(t.unwrap_or(0.5)),
            ("sim" | "similarity", t) => Self::embedding_similarity(t.unwrap_or(0.9)),
            ("em" | "exact_match", None) => Self::exact_match(),
            ("em" | "exact_match", Some(_)) => {
                return Err(Error::InvalidArgument("exact match takes no threshold".into()))
            }
            (other, _) => {
                return Err(Error::InvalidArgument(format!(
                    "unknown correctness measure `{other}` (expected rouge, sim or em)"
                )))
            }
        };
        if !(0.0..=1.0).contains(&measure.threshold) {
            return Err(Error::InvalidArgument(format!(
                "correctness threshold must lie in [0, 1], got {}",
                measure.threshold
            )));
        }
        Ok(measure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correctness {
    pub correct: bool,
    /// Continuous correctness score (max over references).
    pub score: f64,
}

/// SQuAD-style answer normalization: lowercase, punctuation removed,
/// English articles dropped, whitespace collapsed.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Labels a candidate answer against a list of references.
///
/// `embeddings` is `(candidate, references)` and is only consulted by the
/// embedding-similarity measure.
pub fn label_text(
    candidate: &str,
    ground_truths: &[String],
    measure: &CorrectnessMeasure,
    embeddings: Option<(&[f32], &[Vec<f32>])>,
) -> Result<Correctness> {
    if ground_truths.is_empty() {
        return Err(Error::InvalidArgument("no ground-truth answers".into()));
    }
    let score = match measure.kind {
        CorrectnessKind::RougeL => ground_truths
            .iter()
            .map(|gt| rouge_l(candidate, gt).f_measure)
            .fold(f64::NEG_INFINITY, f64::max),
        CorrectnessKind::ExactMatch => {
            let cand = normalize_answer(candidate);
            let hit = ground_truths.iter().any(|gt| normalize_answer(gt) == cand);
            if hit {
                1.0
            } else {
                0.0
            }
        }
        CorrectnessKind::EmbeddingSimilarity => {
            let (cand, refs) = embeddings.ok_or(Error::MissingField {
                trace: String::new(),
                field: "answer_embedding",
            })?;
            let mut best = f64::NEG_INFINITY;
            for r in refs {
                best = best.max(cosine_similarity(cand, r)?);
            }
            best
        }
    };
    Ok(Correctness {
        correct: score >= measure.threshold,
        score,
    })
}

/// Labels generation `index` of `trace`.
pub fn label_correctness(
    trace: &GenerationTrace,
    index: usize,
    measure: &CorrectnessMeasure,
) -> Result<Correctness> {
    let gen = trace.generations.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "trace `{}` has no generation {index}",
            trace.id
        ))
    })?;
    let embeddings = if measure.kind == CorrectnessKind::EmbeddingSimilarity {
        let cand = gen.answer_embedding.as_deref().ok_or_else(|| Error::MissingField {
            trace: trace.id.clone(),
            field: "answer_embedding",
        })?;
        let refs = trace
            .reference_embeddings
            .as_deref()
            .ok_or_else(|| Error::MissingField {
                trace: trace.id.clone(),
                field: "reference_embeddings",
            })?;
        Some((cand, refs))
    } else {
        None
    };
    label_text(&gen.text, &trace.ground_truths, measure, embeddings)
}

fn check_pairs(scores: &[f64], labels_len: usize) -> Result<()> {
    if scores.len() != labels_len {
        return Err(Error::Dimension {
            expected: scores.len(),
            actual: labels_len,
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    Ok(())
}

/// Area under the ROC curve, `P(s_pos > s_neg) + ½ P(s_pos = s_neg)`, with
/// `true` labels as the positive class.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_pairs(scores, labels.len())?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Mann-Whitney U from mid-ranks of tied groups.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&idx| labels[idx]).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y.len())?;
    check_pairs(y, x.len())?;
    if x.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "pearson needs at least 2 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation (Pearson on mid-ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y.len())?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GMean {
    /// Scores strictly above the threshold are predicted positive.
    pub threshold: f64,
    pub gmean: f64,
}

/// Threshold maximizing `sqrt(TPR · (1 - FPR))`, scanned over midpoints of
/// adjacent distinct scores. Ties go to the lowest threshold.
pub fn gmean_threshold(scores: &[f64], labels: &[bool]) -> Result<GMean> {
    check_pairs(scores, labels.len())?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Walk thresholds upward; everything at or below the cut is predicted negative.
    let mut best = GMean {
        threshold: scores[order[0]],
        gmean: 0.0,
    };
    let mut found = false;
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let value = scores[order[i]];
        while i < order.len() && scores[order[i]] == value {
            if labels[order[i]] {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let threshold = 0.5 * (value + scores[order[i]]);
        let tpr = (n_pos - pos_below) as f64 / n_pos as f64;
        let fpr = (n_neg - neg_below) as f64 / n_neg as f64;
        let g = (tpr * (1.0 - fpr)).sqrt();
        if !found || g > best.gmean {
            best = GMean { threshold, gmean: g };
            found = true;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsHallucination,
    LowerIsHallucination,
}

impl Orientation {
    pub fn orient(self, score: f64) -> f64 {
        match self {
            Orientation::HigherIsHallucination => score,
            Orientation::LowerIsHallucination => -score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub auroc: f64,
    /// Correlation between the oriented score and the correctness *error*
    /// (`-score`), so a useful detector has positive PCC regardless of orientation.
    pub pcc: f64,
    /// In the metric's own units. With `lower_is_hallucination`, scores below
    /// it are flagged.
    pub gmean_threshold: f64,
    pub gmean: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub orientation: Orientation,
}

/// Evaluates one metric's scores against correctness labels.
pub fn evaluate_metric(
    metric: &str,
    scores: &[f64],
    correctness: &[Correctness],
    orientation: Orientation,
) -> Result<EvalReport> {
    check_pairs(scores, correctness.len())?;
    let oriented: Vec<f64> = scores.iter().map(|&s| orientation.orient(s)).collect();
    let hallucinated: Vec<bool> = correctness.iter().map(|c| !c.correct).collect();
    let error: Vec<f64> = correctness.iter().map(|c| -c.score).collect();
    let n_pos = hallucinated.iter().filter(|&&h| h).count();

    let auroc = auroc(&oriented, &hallucinated)?;
    let pcc = pearson(&oriented, &error)?;
    let g = gmean_threshold(&oriented, &hallucinated)?;
    Ok(EvalReport {
        metric: metric.to_owned(),
        auroc,
        pcc,
        gmean_threshold: orientation.orient(g.threshold),
        gmean: g.gmean,
        n_pos,
        n_neg: hallucinated.len() - n_pos,
        orientation,
    })
}

/// Fixed-width table, one row per metric, rates as percentages.
pub fn render_table(measure: &CorrectnessMeasure, reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let (n_pos, n_neg) = reports.first().map_or((0, 0), |r| (r.n_pos, r.n_neg));
    let _ = writeln!(
        out,
        "# correctness: {}  (hallucinated: {n_pos}, correct: {n_neg})",
        measure.label()
    );
    let _ = writeln!(
        out,
        "{:<20} {:>8} {:>8} {:>12} {:>8}",
        "metric",
        measure.auroc_column(),
        "PCC",
        "gmean_thr",
        "gmean"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<20} {:>8.1} {:>8.1} {:>12.4} {:>8.3}",
            r.metric,
            100.0 * r.auroc,
            100.0 * r.pcc,
            r.gmean_threshold,
            r.gmean
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn auroc_pairs_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn gmean_sweep_oracle(scores: &[f64], labels: &[bool]) -> GMean {
        let mut uniq = scores.to_vec();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        let n_pos = labels.iter().filter(|&&l| l).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let mut best: Option<GMean> = None;
        for w in uniq.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let tp = scores.iter().zip(labels).filter(|(s, l)| **l && **s > t).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(s, l)| !**l && **s > t).count() as f64;
            let g = ((tp / n_pos) * (1.0 - fp / n_neg)).sqrt();
            if best.is_none_or(|b| g > b.gmean) {
                best = Some(GMean { threshold: t, gmean: g });
            }
        }
        best.unwrap_or(GMean { threshold: uniq[0], gmean: 0.0 })
    }

    #[test]
    fn correct_answer_scores_one() {
        let gts = vec!["prince-electors".to_string()];
        let c = label_text("prince-electors", &gts, &CorrectnessMeasure::rouge_l(0.5), None).unwrap();
        assert!(c.correct);
        assert_eq!(c.score, 1.0);
    }

    #[test]
    fn partial_answer_follows_lcs() {
        // tokens [electors] vs [prince, electors]: P = 1, R = 1/2, f = 2/3
        let gts = vec!["prince-electors".to_string()];
        let c = label_text("electors", &gts, &CorrectnessMeasure::rouge_l(0.5), None).unwrap();
        assert!((c.score - 2.0 / 3.0).abs() < 1e-15);
        assert!(c.correct);
        let c = label_text("electors", &gts, &CorrectnessMeasure::rouge_l(0.7), None).unwrap();
        assert!(!c.correct);
    }

    #[test]
    fn exact_match_case_study() {
        let gts = vec!["from 1967 onwards".to_string()];
        let c = label_text("1969", &gts, &CorrectnessMeasure::exact_match(), None).unwrap();
        assert!(!c.correct);
        assert_eq!(c.score, 0.0);
        let gts = vec!["The Magician".to_string()];
        let c = label_text("magician!", &gts, &CorrectnessMeasure::exact_match(), None).unwrap();
        assert!(c.correct);
    }

    #[test]
    fn multi_reference_takes_max() {
        let gts = vec!["paris".to_string(), "city of light".to_string()];
        let c = label_text("the city of light", &gts, &CorrectnessMeasure::rouge_l(0.5), None).unwrap();
        let best = rouge_l("the city of light", "city of light").f_measure;
        assert_eq!(c.score, best);
    }

    #[test]
    fn similarity_measure() {
        let gts = vec!["a".to_string(), "b".to_string()];
        let refs = vec![vec![1.0f32, 0.0], vec![0.6, 0.8]];
        let cand = [0.6f32, 0.8];
        let m = CorrectnessMeasure::embedding_similarity(0.9);
        let c = label_text("x", &gts, &m, Some((&cand, &refs))).unwrap();
        assert!((c.score - 1.0).abs() < 1e-7);
        assert!(c.correct);
        assert!(matches!(
            label_text("x", &gts, &m, None),
            Err(Error::MissingField { .. })
        ));
    }

    #[test]
    fn threshold_extremes() {
        let gts = vec!["alpha beta".to_string()];
        for cand in ["alpha", "beta gamma", "alpha beta"] {
            let lo = label_text(cand, &gts, &CorrectnessMeasure::rouge_l(0.0), None).unwrap();
            assert!(lo.correct);
            let hi = CorrectnessMeasure {
                kind: CorrectnessKind::RougeL,
                threshold: 1.0 + 1e-9,
            };
            assert!(!label_text(cand, &gts, &hi, None).unwrap().correct);
        }
    }

    #[test]
    fn parse_measures() {
        assert_eq!("rouge:0.3".parse::<CorrectnessMeasure>().unwrap(), CorrectnessMeasure::rouge_l(0.3));
        assert_eq!("sim".parse::<CorrectnessMeasure>().unwrap(), CorrectnessMeasure::embedding_similarity(0.9));
        assert_eq!("em".parse::<CorrectnessMeasure>().unwrap(), CorrectnessMeasure::exact_match());
        assert!("rouge:1.5".parse::<CorrectnessMeasure>().is_err());
        assert!("bleu".parse::<CorrectnessMeasure>().is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer("  The  Detroit Red-Wings! "), "detroit red wings");
        assert_eq!(normalize_answer("an apple"), "apple");
    }

    #[test]
    fn auroc_examples() {
        let labels = [true, true, false, false];
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &labels).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(Error::DegenerateLabels)));

        let scores = [0.3, 0.7, 0.7, 0.1, 0.5, 0.3];
        let labels = [true, false, true, false, true, false];
        assert_eq!(auroc(&scores, &labels).unwrap(), auroc_pairs_oracle(&scores, &labels));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 4.0, 3.5];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(Error::DegenerateInput(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = 10.0;
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|x| x * x).sum();
        let direct = (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
        assert!((pearson(&a, &b).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn gmean_examples() {
        let labels = [false, false, true, true];
        let g = gmean_threshold(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap();
        assert_eq!(g.gmean, 1.0);
        assert!(g.threshold > 0.2 && g.threshold < 0.8);

        let g = gmean_threshold(&[0.4; 4], &labels).unwrap();
        assert_eq!(g.gmean, 0.0);

        let scores = [0.1, 0.4, 0.35, 0.8, 0.65, 0.2, 0.9, 0.5];
        let labels = [false, true, false, true, false, false, true, true];
        assert_eq!(gmean_threshold(&scores, &labels).unwrap(), gmean_sweep_oracle(&scores, &labels));
        assert!(matches!(gmean_threshold(&[1.0, 2.0], &[false, false]), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn lower_orientation_flips_threshold() {
        let corr = [
            Correctness { correct: true, score: 1.0 },
            Correctness { correct: true, score: 0.9 },
            Correctness { correct: false, score: 0.1 },
            Correctness { correct: false, score: 0.0 },
        ];
        // lexical-similarity-like: low similarity means hallucination
        let scores = [0.95, 0.9, 0.2, 0.3];
        let r = evaluate_metric("lexsim", &scores, &corr, Orientation::LowerIsHallucination).unwrap();
        assert_eq!(r.auroc, 1.0);
        assert!(r.pcc > 0.9);
        assert!(r.gmean_threshold > 0.3 && r.gmean_threshold < 0.9);
        assert_eq!((r.n_pos, r.n_neg), (2, 2));

        let table = render_table(&CorrectnessMeasure::rouge_l(0.5), &[r]);
        assert!(table.contains("AUROC_r"));
        assert!(table.contains("lexsim"));
        assert!(table.contains("100.0"));
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [10.0, 100.0, 1000.0, 1e4];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..12).prop_map(|v| v as f64 / 4.0), n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
    }

    proptest! {
        #[test]
        fn auroc_monotone_invariance((s, l) in labelled()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(auroc(&s, &l).unwrap(), auroc(&t, &l).unwrap());
        }

        #[test]
        fn auroc_negation_complements((s, l) in labelled()) {
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auroc(&s, &l).unwrap() + auroc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn auroc_matches_pair_count((s, l) in labelled()) {
            prop_assert_eq!(auroc(&s, &l).unwrap(), auroc_pairs_oracle(&s, &l));
        }

        #[test]
        fn gmean_matches_sweep((s, l) in labelled()) {
            prop_assert_eq!(gmean_threshold(&s, &l).unwrap(), gmean_sweep_oracle(&s, &l));
        }

        #[test]
        fn pearson_affine_invariance(
            xy in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
            a in 0.1f64..10.0, b in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            prop_assume!(pearson(&x, &y).is_ok());
            let r = pearson(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let xn: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
            prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-10);
            prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-10);
        }
    }
}
