use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::BBox;
use crate::ovdetect::{DetectionRecord, Split, VocabularyFile};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

type FrameBoxes = Vec<(u64, BBox)>;

pub fn iou(a: &BBox, b: &BBox) -> Result<f64, EvalError> {
    for bx in [a, b] {
        if !bx.is_valid() {
            return Err(EvalError::DegenerateBox(bx.x1, bx.y1, bx.x2, bx.y2));
        }
    }
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return Ok(0.0);
    }
    Ok(inter / (a.area() + b.area() - inter))
}

/// A detection of one category in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub frame: u64,
    pub bbox: BBox,
    pub score: f64,
}

/// All-points interpolated AP for one category.
///
/// Detections are visited by descending score (stable, so equal scores keep
/// input order); each claims the unmatched same-frame ground truth with the
/// highest IoU, which must reach `iou_thresh`. Returns `None` when there is
/// no ground truth.
pub fn average_precision(dets: &[ScoredBox], gts: &[(u64, BBox)], iou_thresh: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut matched = vec![false; gts.len()];
    let mut tp = 0usize;
    // (true positives so far, precision) per rank
    let mut curve: Vec<(usize, f64)> = Vec::with_capacity(dets.len());
    for (rank, &di) in order.iter().enumerate() {
        let d = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, (frame, g)) in gts.iter().enumerate() {
            if matched[gi] || *frame != d.frame {
                continue;
            }
            let o = iou(&d.bbox, g).unwrap_or(0.0);
            if o >= iou_thresh && best.is_none_or(|(_, b)| o > b) {
                best = Some((gi, o));
            }
        }
        if let Some((gi, _)) = best {
            matched[gi] = true;
            tp += 1;
        }
        curve.push((tp, tp as f64 / (rank + 1) as f64));
    }
    // precision envelope from the right, summed over recall steps in whole
    // true positives so a perfect curve sums to exactly n_gt
    let mut area = 0.0;
    let mut envelope = 0.0f64;
    let mut next_tp = None;
    for &(t, p) in curve.iter().rev() {
        if let Some(nt) = next_tp {
            if nt > t {
                area += (nt - t) as f64 * envelope;
            }
        }
        envelope = envelope.max(p);
        next_tp = Some(t);
    }
    if let Some(t0) = next_tp {
        area += t0 as f64 * envelope;
    }
    let ap = area / gts.len() as f64;
    Some(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub frame: u64,
    pub objects: Vec<GtObject>,
}

/// Ground-truth file: boxes per frame with split tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<GtFrame>,
}

impl GroundTruth {
    pub fn object_count(&self) -> usize {
        self.frames.iter().map(|f| f.objects.len()).sum()
    }

    /// Appends frames, renumbering them after the current last frame.
    pub fn extend_offset(&mut self, other: GroundTruth) -> u64 {
        let offset = self.frames.iter().map(|f| f.frame + 1).max().unwrap_or(0);
        for mut f in other.frames {
            f.frame += offset;
            self.frames.push(f);
        }
        offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAp {
    pub label: String,
    pub split: Split,
    pub num_gt: usize,
    pub num_det: usize,
    pub ap: f64,
}

/// Means over categories with at least one ground-truth instance; `None`
/// when a group has no such category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap_seen: Option<f64>,
    pub ap_unseen: Option<f64>,
    pub ap_all: Option<f64>,
    pub map: Option<f64>,
    pub categories: Vec<CategoryAp>,
}

impl ApReport {
    /// Plain-text table with one row per method.
    pub fn table(rows: &[(&str, &ApReport)]) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Method".len());
        let mut out = format!(
            "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}\n",
            "Method", "AP_seen", "AP_unseen", "AP_all", "mAP"
        );
        for (name, r) in rows {
            out += &format!(
                "{:<width$}  {:>8}  {:>9}  {:>6}  {:>6}\n",
                name,
                fmt(r.ap_seen),
                fmt(r.ap_unseen),
                fmt(r.ap_all),
                fmt(r.map)
            );
        }
        out
    }
}

fn mean(vals: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = vals.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-category AP at IoU ≥ 0.5, averaged over seen, unseen and all
/// categories. Category splits come from the ground truth; a vocabulary
/// that tags a label differently is rejected.
pub fn evaluate_splits(
    log: &[DetectionRecord],
    gt: &GroundTruth,
    vocab: &VocabularyFile,
) -> Result<ApReport, EvalError> {
    if gt.object_count() == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let vocab_split: HashMap<&str, Split> = vocab.prompts.iter().map(|p| (p.label.as_str(), p.split)).collect();
    let mut categories: BTreeMap<&str, (Split, FrameBoxes)> = BTreeMap::new();
    for f in &gt.frames {
        for o in &f.objects {
            if let Some(&vs) = vocab_split.get(o.label.as_str()) {
                if vs != o.split {
                    return Err(EvalError::SplitConflict {
                        label: o.label.clone(),
                        gt: o.split.as_str().into(),
                        vocab: vs.as_str().into(),
                    });
                }
            }
            categories
                .entry(o.label.as_str())
                .or_insert_with(|| (o.split, Vec::new()))
                .1
                .push((f.frame, o.bbox));
        }
    }
    let mut per_cat = Vec::with_capacity(categories.len());
    for (label, (split, gts)) in &categories {
        let dets: Vec<ScoredBox> = log
            .iter()
            .filter(|d| d.label == *label)
            .map(|d| ScoredBox {
                frame: d.frame,
                bbox: d.bbox,
                score: d.score,
            })
            .collect();
        let ap = average_precision(&dets, gts, DEFAULT_IOU_THRESHOLD).unwrap_or(0.0);
        per_cat.push(CategoryAp {
            label: label.to_string(),
            split: *split,
            num_gt: gts.len(),
            num_det: dets.len(),
            ap,
        });
    }
    let of = |s: Split| mean(per_cat.iter().filter(|c| c.split == s).map(|c| c.ap));
    let all = mean(per_cat.iter().map(|c| c.ap));
    Ok(ApReport {
        ap_seen: of(Split::Seen),
        ap_unseen: of(Split::Unseen),
        ap_all: all,
        map: all,
        categories: per_cat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ovdetect::PromptSpec;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2)
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b(5.0, 5.0, 6.0, 6.0)).unwrap(), 0.0);
        assert!((iou(&a, &b(1.0, 1.0, 3.0, 3.0)).unwrap() - 1.0 / 7.0).abs() < 1e-12);
        assert!(matches!(iou(&a, &b(1.0, 1.0, 1.0, 3.0)), Err(EvalError::DegenerateBox(..))));
    }

    fn sb(frame: u64, bx: BBox, score: f64) -> ScoredBox {
        ScoredBox { frame, bbox: bx, score }
    }

    #[test]
    fn ap_perfect_and_empty() {
        let g = vec![(0, b(0.0, 0.0, 10.0, 10.0)), (1, b(5.0, 5.0, 20.0, 20.0))];
        let d = vec![sb(0, g[0].1, 0.9), sb(1, g[1].1, 0.8)];
        assert_eq!(average_precision(&d, &g, 0.5), Some(1.0));
        assert_eq!(average_precision(&[], &g, 0.5), Some(0.0));
        assert_eq!(average_precision(&d, &[], 0.5), None);
    }

    #[test]
    fn ap_tp_fp_tp() {
        // recall .5 @ precision 1, recall 1 @ precision 2/3
        let g = vec![(0, b(0.0, 0.0, 10.0, 10.0)), (0, b(50.0, 50.0, 60.0, 60.0))];
        let d = vec![
            sb(0, g[0].1, 0.9),
            sb(0, b(100.0, 100.0, 110.0, 110.0), 0.8),
            sb(0, g[1].1, 0.7),
        ];
        let ap = average_precision(&d, &g, 0.5).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let g = vec![(0, b(0.0, 0.0, 10.0, 10.0))];
        let d = vec![sb(0, g[0].1, 0.9), sb(0, g[0].1, 0.95)];
        assert_eq!(average_precision(&d, &g, 0.5), Some(1.0));
        let d = vec![sb(0, b(0.0, 0.0, 10.0, 10.0), 0.5), sb(0, b(30.0, 0.0, 40.0, 10.0), 0.9)];
        assert!((average_precision(&d, &g, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    fn gt_frame(frame: u64, objs: &[(&str, Split, BBox)]) -> GtFrame {
        GtFrame {
            frame,
            objects: objs
                .iter()
                .map(|(l, s, bx)| GtObject {
                    label: l.to_string(),
                    bbox: *bx,
                    split: *s,
                })
                .collect(),
        }
    }

    fn rec(frame: u64, label: &str, bx: BBox) -> DetectionRecord {
        DetectionRecord {
            frame,
            label: label.into(),
            score: 0.7,
            bbox: bx,
            id: 1,
        }
    }

    fn empty_vocab() -> VocabularyFile {
        VocabularyFile {
            prompts: vec![],
            alpha: 1.0,
            beta: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn splits_perfect_and_closed() {
        let apple = b(0.0, 0.0, 10.0, 10.0);
        let cup = b(20.0, 20.0, 40.0, 40.0);
        let gt = GroundTruth {
            frames: vec![gt_frame(0, &[("apple", Split::Seen, apple), ("cup", Split::Unseen, cup)])],
        };
        let perfect = evaluate_splits(&[rec(0, "apple", apple), rec(0, "cup", cup)], &gt, &empty_vocab()).unwrap();
        assert_eq!(
            (perfect.ap_seen, perfect.ap_unseen, perfect.ap_all, perfect.map),
            (Some(1.0), Some(1.0), Some(1.0), Some(1.0))
        );
        let closed = evaluate_splits(&[rec(0, "apple", apple)], &gt, &empty_vocab()).unwrap();
        assert_eq!(closed.ap_unseen, Some(0.0));
        assert_eq!(closed.ap_seen, Some(1.0));
        assert_eq!(closed.map, Some(0.5));
    }

    #[test]
    fn splits_errors() {
        assert_eq!(
            evaluate_splits(&[], &GroundTruth::default(), &empty_vocab()),
            Err(EvalError::EmptyGroundTruth)
        );
        let gt = GroundTruth {
            frames: vec![gt_frame(0, &[("cup", Split::Unseen, b(0.0, 0.0, 1.0, 1.0))])],
        };
        let vocab = VocabularyFile {
            prompts: vec![PromptSpec {
                label: "cup".into(),
                split: Split::Seen,
            }],
            ..empty_vocab()
        };
        assert!(matches!(evaluate_splits(&[], &gt, &vocab), Err(EvalError::SplitConflict { .. })));
    }

    #[test]
    fn ground_truth_json() {
        let json = r#"{"frames":[{"frame":2,"objects":[{"label":"cup","box":[1,2,3,4],"split":"unseen"}]}]}"#;
        let gt: GroundTruth = serde_json::from_str(json).unwrap();
        assert_eq!(gt.frames[0].objects[0].bbox, b(1.0, 2.0, 3.0, 4.0));
        let mut all = gt.clone();
        assert_eq!(all.extend_offset(gt), 3);
        assert_eq!(all.frames[1].frame, 5);
    }

    #[test]
    fn table_renders() {
        let r = ApReport {
            ap_seen: Some(1.0),
            ap_unseen: Some(0.0),
            ap_all: Some(0.5),
            map: Some(0.5),
            categories: vec![],
        };
        let t = ApReport::table(&[("closed", &r)]);
        assert!(t.contains("AP_unseen"));
        assert!(t.contains("closed"));
        assert!(t.contains("0.50"));
    }
}
