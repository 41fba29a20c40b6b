//! Agreement between predicted labels and self-reported SAM ratings, and
//! rank/product-moment correlations against EEG band powers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affect::LabelSeries;
use crate::curve::{to_sam_scale, SamScalePair};
use crate::{Error, Result};

pub const SAM_RANGE: f64 = 6.0;
/// Seven SAM points 0..=6, the alternative divisor for percentages.
pub const SAM_POINTS: f64 = 7.0;

/// One participant's rating of a situation: valence −3..3, arousal 0..6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub situation_id: String,
    pub valence: f64,
    pub arousal: f64,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if !(-3.0..=3.0).contains(&self.valence) || !(0.0..=6.0).contains(&self.arousal) {
            return Err(Error::invalid(format!(
                "rating for {} out of range: valence {} arousal {}",
                self.situation_id, self.valence, self.arousal
            )));
        }
        Ok(())
    }

    /// Both dimensions on the 0–6 scale.
    pub fn to_sam(&self) -> SamScalePair {
        SamScalePair {
            v6: self.valence + 3.0,
            a6: self.arousal,
        }
    }
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>> {
    let csv_err = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => csv_err(format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RatingRecord>().enumerate() {
        let rec = rec.map_err(|e| csv_err(format!("line {}: {e}", i + 2)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

/// Per-dimension temporal mean of a label series on the 0–6 scale.
pub fn situation_label_summary(labels: &LabelSeries) -> Result<SamScalePair> {
    if labels.valence.is_empty() || labels.arousal.is_empty() {
        return Err(Error::InsufficientData("empty label series".into()));
    }
    let m = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    to_sam_scale(
        m(&labels.valence).clamp(-1.0, 1.0),
        m(&labels.arousal).clamp(0.0, 1.0),
    )
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "rmse inputs differ in length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("rmse of empty series".into()));
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// `100 · (1 − rmse / range)`.
pub fn normalized_rmse_pct(rmse: f64, range: f64) -> f64 {
    100.0 * (1.0 - rmse / range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionScores {
    pub valence: f64,
    pub arousal: f64,
}

/// Per-dimension RMSE between paired 0–6 summaries.
pub fn rmse_pairs(pred: &[SamScalePair], truth: &[SamScalePair]) -> Result<DimensionScores> {
    let v = |s: &[SamScalePair]| s.iter().map(|p| p.v6).collect::<Vec<_>>();
    let a = |s: &[SamScalePair]| s.iter().map(|p| p.a6).collect::<Vec<_>>();
    Ok(DimensionScores {
        valence: rmse(&v(pred), &v(truth))?,
        arousal: rmse(&a(pred), &a(truth))?,
    })
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "correlation inputs differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    Ok(())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Numeric("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their average rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SituationScore {
    pub situation_id: String,
    pub predicted: SamScalePair,
    pub rating: Option<SamScalePair>,
    /// Number of ratings averaged into `rating`.
    pub raters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub rating: String,
    pub channel: String,
    pub band: String,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub situations: Vec<SituationScore>,
    pub rmse: Option<DimensionScores>,
    pub normalized_pct_range6: Option<DimensionScores>,
    pub normalized_pct_range7: Option<DimensionScores>,
    pub correlations: Vec<CorrelationEntry>,
    pub warnings: Vec<String>,
}

/// Band power of one situation keyed by (channel, band).
pub type BandPowers = BTreeMap<(String, String), f64>;

/// Build the report. Several ratings for one situation are averaged.
pub fn evaluate(
    predicted: &BTreeMap<String, SamScalePair>,
    ratings: &[RatingRecord],
    band_powers: &BTreeMap<String, BandPowers>,
) -> Result<EvalReport> {
    let mut grouped: BTreeMap<&str, Vec<SamScalePair>> = BTreeMap::new();
    for r in ratings {
        grouped.entry(&r.situation_id).or_default().push(r.to_sam());
    }
    let mut warnings = Vec::new();
    for id in grouped.keys() {
        if !predicted.contains_key(*id) {
            warnings.push(format!("rating for unknown situation {id} ignored"));
        }
    }
    let situations: Vec<SituationScore> = predicted
        .iter()
        .map(|(id, p)| {
            let rs = grouped.get(id.as_str());
            let rating = rs.map(|rs| {
                let n = rs.len() as f64;
                SamScalePair {
                    v6: rs.iter().map(|r| r.v6).sum::<f64>() / n,
                    a6: rs.iter().map(|r| r.a6).sum::<f64>() / n,
                }
            });
            SituationScore {
                situation_id: id.clone(),
                predicted: *p,
                rating,
                raters: rs.map_or(0, |r| r.len()),
            }
        })
        .collect();

    let rated: Vec<&SituationScore> = situations.iter().filter(|s| s.rating.is_some()).collect();
    let (rmse_s, pct6, pct7) = if rated.is_empty() {
        warnings.push("no rated situations; RMSE not computed".into());
        (None, None, None)
    } else {
        let pred: Vec<SamScalePair> = rated.iter().map(|s| s.predicted).collect();
        let truth: Vec<SamScalePair> = rated.iter().map(|s| s.rating.unwrap()).collect();
        let r = rmse_pairs(&pred, &truth)?;
        let pct = |range| DimensionScores {
            valence: normalized_rmse_pct(r.valence, range),
            arousal: normalized_rmse_pct(r.arousal, range),
        };
        (Some(r), Some(pct(SAM_RANGE)), Some(pct(SAM_POINTS)))
    };

    let mut correlations = Vec::new();
    let with_eeg: Vec<(&SituationScore, &BandPowers)> = rated
        .iter()
        .filter_map(|s| band_powers.get(&s.situation_id).map(|b| (*s, b)))
        .collect();
    if let Some((_, first)) = with_eeg.first() {
        for key in first.keys() {
            let xs: Vec<(f64, f64, f64)> = with_eeg
                .iter()
                .filter_map(|(s, b)| {
                    let r = s.rating.unwrap();
                    b.get(key).map(|p| (r.v6, r.a6, *p))
                })
                .collect();
            let p: Vec<f64> = xs.iter().map(|x| x.2).collect();
            for (name, vals) in [
                ("valence", xs.iter().map(|x| x.0).collect::<Vec<_>>()),
                ("arousal", xs.iter().map(|x| x.1).collect::<Vec<_>>()),
            ] {
                correlations.push(CorrelationEntry {
                    rating: name.to_string(),
                    channel: key.0.clone(),
                    band: key.1.clone(),
                    spearman: spearman(&vals, &p).ok(),
                    pearson: pearson(&vals, &p).ok(),
                });
            }
        }
        if with_eeg.len() < 3 {
            warnings.push(format!(
                "{} rated situations with EEG; correlations need at least 3",
                with_eeg.len()
            ));
        }
    }
    Ok(EvalReport {
        situations,
        rmse: rmse_s,
        normalized_pct_range6: pct6,
        normalized_pct_range7: pct7,
        correlations,
        warnings,
    })
}
