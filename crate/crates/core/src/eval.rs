//! Mask IOU, class-gated instance matching and refined-vs-unrefined reports.

use std::fmt::Write as _;

use thiserror::Error;

use crate::refine::{InstanceMask, PanopticLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("mask dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },

    #[error("{pred} predicted frames but {gt} ground-truth frames")]
    FrameCountMismatch { pred: usize, gt: usize },

    #[error("no non-empty ground-truth instances to evaluate")]
    NoInstances,
}

/// `|a ∩ b| / |a ∪ b|`, or `None` when both masks are empty.
pub fn instance_iou(a: &InstanceMask, b: &InstanceMask) -> Result<Option<f64>, EvalError> {
    let (da, db) = ((a.width(), a.height()), (b.width(), b.height()));
    if da != db {
        return Err(EvalError::DimensionMismatch { a: da, b: db });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// In the order the pairs were chosen, i.e. by descending IOU.
    pub pairs: Vec<MatchPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl Matching {
    /// IOU credited to ground truth `gt`; 0 when unmatched.
    pub fn gt_iou(&self, gt: usize) -> f64 {
        self.pairs
            .iter()
            .find(|p| p.gt == gt)
            .map_or(0.0, |p| p.iou)
    }
}

/// Greedy matching within equal class ids: repeatedly takes the highest-IOU
/// remaining pair with IOU > 0. Ties go to the lower ground-truth index, then the
/// lower prediction index.
pub fn match_instances(
    preds: &[InstanceMask],
    gts: &[InstanceMask],
) -> Result<Matching, EvalError> {
    let mut candidates = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        for (pi, p) in preds.iter().enumerate() {
            if p.label.class_id != g.label.class_id {
                continue;
            }
            if let Some(iou) = instance_iou(p, g)? {
                if iou > 0.0 {
                    candidates.push(MatchPair {
                        pred: pi,
                        gt: gi,
                        iou,
                    });
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.gt.cmp(&b.gt))
            .then(a.pred.cmp(&b.pred))
    });
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.pred] && !gt_used[c.gt] {
            pred_used[c.pred] = true;
            gt_used[c.gt] = true;
            pairs.push(c);
        }
    }
    let unused = |used: &[bool]| {
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(i, _)| i)
            .collect()
    };
    Ok(Matching {
        pairs,
        unmatched_preds: unused(&pred_used),
        unmatched_gts: unused(&gt_used),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceScore {
    pub label: PanopticLabel,
    /// 0 for an unmatched ground truth.
    pub iou: f64,
}

/// Instance-mean mask IOU over a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    pub variant: String,
    /// Scores of the non-empty ground-truth instances of each frame.
    pub per_frame: Vec<Vec<InstanceScore>>,
    pub mean_percent: f64,
    pub matched: usize,
    pub unmatched: usize,
}

impl IouReport {
    pub fn instance_count(&self) -> usize {
        self.matched + self.unmatched
    }
}

/// Scores every non-empty ground-truth mask against its greedy match. Empty
/// ground-truth masks are left out of the aggregate.
pub fn dataset_mask_iou(
    preds: &[Vec<InstanceMask>],
    gts: &[Vec<InstanceMask>],
    variant: &str,
) -> Result<IouReport, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::FrameCountMismatch {
            pred: preds.len(),
            gt: gts.len(),
        });
    }
    let mut per_frame = Vec::with_capacity(gts.len());
    let (mut matched, mut unmatched, mut sum) = (0, 0, 0.0);
    for (p, g) in preds.iter().zip(gts) {
        let g: Vec<InstanceMask> = g.iter().filter(|m| !m.is_empty()).cloned().collect();
        let m = match_instances(p, &g)?;
        let scores: Vec<InstanceScore> = g
            .iter()
            .enumerate()
            .map(|(i, gt)| InstanceScore {
                label: gt.label,
                iou: m.gt_iou(i),
            })
            .collect();
        matched += m.pairs.len();
        unmatched += m.unmatched_gts.len();
        sum += scores.iter().map(|s| s.iou).sum::<f64>();
        per_frame.push(scores);
    }
    let n = matched + unmatched;
    if n == 0 {
        return Err(EvalError::NoInstances);
    }
    Ok(IouReport {
        variant: variant.to_string(),
        per_frame,
        mean_percent: 100.0 * sum / n as f64,
        matched,
        unmatched,
    })
}

pub const WITHOUT_REFINEMENT: &str = "without refinement";
pub const WITH_REFINEMENT: &str = "with refinement";

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: String,
    pub mask_iou_percent: f64,
    /// Difference to the previous row.
    pub change: Option<f64>,
}

/// Rows of mask IOU per variant, each compared with the row above it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn from_reports(reports: &[IouReport]) -> Self {
        let mut rows: Vec<ComparisonRow> = Vec::with_capacity(reports.len());
        for r in reports {
            let change = rows
                .last()
                .map(|prev| r.mean_percent - prev.mask_iou_percent);
            rows.push(ComparisonRow {
                variant: r.variant.clone(),
                mask_iou_percent: r.mean_percent,
                change,
            });
        }
        Self { rows }
    }

    fn change_text(change: Option<f64>) -> String {
        match change {
            None => "-".to_string(),
            Some(c) => format!("{c:+.4}"),
        }
    }

    pub fn to_text(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.variant.len())
            .chain(["variant".len()])
            .max()
            .unwrap_or(0);
        let mut s = format!(
            "{:<name_w$}  {:>8}  {:>9}\n",
            "variant", "mask IOU", "change"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<name_w$}  {:>8.4}  {:>9}",
                r.variant,
                r.mask_iou_percent,
                Self::change_text(r.change)
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,mask_iou_percent,change\n");
        for r in &self.rows {
            let change = r.change.map(|c| format!("{c:.4}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.4},{change}", r.variant, r.mask_iou_percent);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, on: &[usize], class: u16, id: u32) -> InstanceMask {
        let mut bits = vec![false; w * h];
        for &i in on {
            bits[i] = true;
        }
        InstanceMask::new(w, h, bits, PanopticLabel::new(class, id))
    }

    #[test]
    fn hand_counted_fractions() {
        let a = mask(4, 1, &[0, 1], 1, 1);
        let b = mask(4, 1, &[2, 3], 1, 2);
        let ab = mask(4, 1, &[0, 1, 2, 3], 1, 3);
        let shifted = mask(4, 1, &[1, 2], 1, 4);
        assert_eq!(instance_iou(&a, &a).unwrap(), Some(1.0));
        assert_eq!(instance_iou(&a, &b).unwrap(), Some(0.0));
        assert_eq!(instance_iou(&a, &ab).unwrap(), Some(0.5));
        assert_eq!(instance_iou(&a, &shifted).unwrap(), Some(1.0 / 3.0));
        let empty = mask(4, 1, &[], 1, 5);
        assert_eq!(instance_iou(&empty, &empty).unwrap(), None);
        assert_eq!(instance_iou(&a, &empty).unwrap(), Some(0.0));
        assert!(instance_iou(&a, &mask(2, 2, &[], 1, 1)).is_err());
    }

    #[test]
    fn class_gating() {
        let g = mask(3, 1, &[0, 1], 1, 1);
        let p = mask(3, 1, &[0, 1], 2, 1);
        let m = match_instances(&[p], std::slice::from_ref(&g)).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gts, vec![0]);
        let p = mask(3, 1, &[1, 2], 1, 9);
        let m = match_instances(&[p], &[g]).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].iou, 1.0 / 3.0);
    }

    #[test]
    fn greedy_takes_highest_pair_first() {
        let g0 = mask(6, 1, &[0, 1, 2], 1, 1);
        let g1 = mask(6, 1, &[3, 4, 5], 1, 2);
        let p0 = mask(6, 1, &[0, 1, 2, 3], 1, 10); // 3/4 with g0, 1/6 with g1
        let p1 = mask(6, 1, &[2, 3, 4, 5], 1, 11); // 1/6 with g0, 3/4 with g1
        let m = match_instances(&[p0, p1], &[g0, g1]).unwrap();
        assert_eq!(m.pairs.len(), 2);
        assert_eq!((m.pairs[0].pred, m.pairs[0].gt), (0, 0));
        assert_eq!((m.pairs[1].pred, m.pairs[1].gt), (1, 1));
    }

    #[test]
    fn dataset_aggregates() {
        let g = vec![vec![
            mask(2, 2, &[0, 1], 1, 1),
            mask(2, 2, &[2], 1, 2),
            mask(2, 2, &[], 1, 3),
        ]];
        let r = dataset_mask_iou(&g, &g, "same").unwrap();
        assert_eq!(r.mean_percent, 100.0);
        assert_eq!((r.matched, r.unmatched), (2, 0));
        let none = vec![vec![]];
        let r = dataset_mask_iou(&none, &g, "none").unwrap();
        assert_eq!(r.mean_percent, 0.0);
        assert_eq!(r.instance_count(), 2);
        assert!(dataset_mask_iou(&[], &g, "x").is_err());
        assert_eq!(
            dataset_mask_iou(&none, &none, "x"),
            Err(EvalError::NoInstances)
        );
    }

    #[test]
    fn frame_order_does_not_change_mean() {
        let f0 = (
            vec![mask(3, 1, &[0], 1, 1)],
            vec![mask(3, 1, &[0, 1], 1, 1)],
        );
        let f1 = (
            vec![mask(3, 1, &[0, 1, 2], 1, 1)],
            vec![mask(3, 1, &[2], 1, 1)],
        );
        let a = dataset_mask_iou(
            &[f0.0.clone(), f1.0.clone()],
            &[f0.1.clone(), f1.1.clone()],
            "a",
        )
        .unwrap();
        let b = dataset_mask_iou(&[f1.0, f0.0], &[f1.1, f0.1], "b").unwrap();
        assert!((a.mean_percent - b.mean_percent).abs() < 1e-12);
    }

    #[test]
    fn table_formats() {
        let mk = |v: &str, p: f64| IouReport {
            variant: v.into(),
            per_frame: vec![],
            mean_percent: p,
            matched: 1,
            unmatched: 0,
        };
        let t = ComparisonTable::from_reports(&[
            mk(WITHOUT_REFINEMENT, 79.886),
            mk(WITH_REFINEMENT, 90.6077),
        ]);
        assert_eq!(
            t.to_csv(),
            "variant,mask_iou_percent,change\nwithout refinement,79.8860,\nwith refinement,90.6077,10.7217\n"
        );
        let text = t.to_text();
        assert!(text.contains("+10.7217"));
        let widths: Vec<usize> = text.lines().map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{text}");
    }
}
