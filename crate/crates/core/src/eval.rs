//! Segmentation quality metrics over label maps with void pixels.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A `width × height` grid of labels; `None` marks void (unlabeled) pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<Option<usize>>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::mismatch(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    /// Fully labeled map.
    pub fn from_labels(width: usize, height: usize, labels: &[usize]) -> Result<Self> {
        Self::new(width, height, labels.iter().map(|&l| Some(l)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<usize> {
        self.labels[y * self.width + x]
    }

    /// One more than the largest label present, or 0 if all void.
    pub fn label_count(&self) -> usize {
        self.labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0)
    }

    /// Apply a relabeling `l → perm[l]`, keeping void.
    pub fn relabeled(&self, perm: &[usize]) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|l| l.map(|l| perm[l])).collect(),
        }
    }
}

fn check_dims(pred: &LabelMap, gt: &LabelMap) -> Result<()> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::mismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(())
}

/// `(correct, counted)` over pixels with a ground-truth label.
pub fn accuracy_counts(pred: &LabelMap, gt: &LabelMap) -> Result<(usize, usize)> {
    check_dims(pred, gt)?;
    let mut correct = 0;
    let mut total = 0;
    for (p, g) in pred.labels.iter().zip(&gt.labels) {
        if let Some(g) = g {
            total += 1;
            if *p == Some(*g) {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}

/// Percentage of non-void pixels labeled correctly.
pub fn global_accuracy(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let (correct, total) = accuracy_counts(pred, gt)?;
    if total == 0 {
        return Err(Error::Empty("ground truth is entirely void".into()));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Unweighted mean of per-class recall over classes present in `gt`.
pub fn average_accuracy(pred: &LabelMap, gt: &LabelMap, labels: usize) -> Result<f64> {
    check_dims(pred, gt)?;
    let mut hits = vec![0usize; labels];
    let mut counts = vec![0usize; labels];
    for (p, g) in pred.labels.iter().zip(&gt.labels) {
        if let Some(g) = *g {
            if g >= labels {
                return Err(Error::LabelOutOfRange { label: g, labels });
            }
            counts[g] += 1;
            if *p == Some(g) {
                hits[g] += 1;
            }
        }
    }
    let present: Vec<f64> = hits
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&h, &c)| h as f64 / c as f64)
        .collect();
    if present.is_empty() {
        return Err(Error::Empty("ground truth is entirely void".into()));
    }
    Ok(100.0 * present.iter().sum::<f64>() / present.len() as f64)
}

/// Pixels with a non-void 4-neighbor of a different non-void label.
pub fn boundary_pixels(gt: &LabelMap) -> Vec<bool> {
    let (w, h) = (gt.width, gt.height);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let Some(l) = gt.get(x, y) else { continue };
            let mut nbs = [None; 4];
            if x > 0 {
                nbs[0] = gt.get(x - 1, y);
            }
            if x + 1 < w {
                nbs[1] = gt.get(x + 1, y);
            }
            if y > 0 {
                nbs[2] = gt.get(x, y - 1);
            }
            if y + 1 < h {
                nbs[3] = gt.get(x, y + 1);
            }
            out[y * w + x] = nbs.iter().flatten().any(|&n| n != l);
        }
    }
    out
}

/// Non-void pixels within Chebyshev distance `width` of a boundary pixel.
pub fn trimap_band(gt: &LabelMap, width: usize) -> Vec<bool> {
    let (w, h) = (gt.width, gt.height);
    let boundary = boundary_pixels(gt);
    // Chebyshev dilation is separable: rows, then columns.
    let mut rows = vec![false; w * h];
    for y in 0..h {
        let mut last: Option<usize> = None;
        let line = &boundary[y * w..(y + 1) * w];
        // distance to the nearest boundary pixel on the left, then right
        let mut left = vec![usize::MAX; w];
        for x in 0..w {
            if line[x] {
                last = Some(x);
            }
            if let Some(b) = last {
                left[x] = x - b;
            }
        }
        last = None;
        for x in (0..w).rev() {
            if line[x] {
                last = Some(x);
            }
            let right = last.map_or(usize::MAX, |b| b - x);
            rows[y * w + x] = left[x].min(right) <= width;
        }
    }
    let mut band = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(width);
            let hi = (y + width).min(h - 1);
            band[y * w + x] = gt.labels[y * w + x].is_some() && (lo..=hi).any(|yy| rows[yy * w + x]);
        }
    }
    band
}

/// Percentage of misclassified pixels inside the trimap band of `width`.
pub fn trimap_error(pred: &LabelMap, gt: &LabelMap, width: usize) -> Result<f64> {
    check_dims(pred, gt)?;
    if width == 0 {
        return Err(Error::InvalidParameter("trimap width must be at least 1".into()));
    }
    let band = trimap_band(gt, width);
    let mut size = 0usize;
    let mut wrong = 0usize;
    for ((&inside, p), g) in band.iter().zip(&pred.labels).zip(&gt.labels) {
        if inside {
            size += 1;
            if p != g {
                wrong += 1;
            }
        }
    }
    if size == 0 {
        return Err(Error::EmptyBand);
    }
    Ok(100.0 * wrong as f64 / size as f64)
}

/// Intersection-over-union scores.
#[derive(Debug, Clone, PartialEq)]
pub struct VocScore {
    /// Per class; `None` when the class appears in neither map.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes with a non-empty union.
    pub mean: f64,
}

/// Per-class `|pred ∩ gt| / |pred ∪ gt|` over non-void ground-truth pixels.
pub fn voc_iou(pred: &LabelMap, gt: &LabelMap, labels: usize) -> Result<VocScore> {
    check_dims(pred, gt)?;
    let mut inter = vec![0usize; labels];
    let mut union = vec![0usize; labels];
    for (p, g) in pred.labels.iter().zip(&gt.labels) {
        let Some(g) = *g else { continue };
        if g >= labels {
            return Err(Error::LabelOutOfRange { label: g, labels });
        }
        union[g] += 1;
        match *p {
            Some(p) if p == g => inter[g] += 1,
            Some(p) if p < labels => union[p] += 1,
            Some(p) => return Err(Error::LabelOutOfRange { label: p, labels }),
            None => {}
        }
    }
    let per_class: Vec<Option<f64>> = inter
        .iter()
        .zip(&union)
        .map(|(&i, &u)| (u > 0).then(|| 100.0 * i as f64 / u as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Empty("ground truth is entirely void".into()));
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(VocScore { per_class, mean })
}

/// Flat metric report, rendered as `key=value` lines or CSV rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    entries: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v:?}");
        }
        s
    }

    /// `image,metric,value` rows, no header.
    pub fn to_csv_rows(&self, image: &str) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{image},{k},{v:.6}");
        }
        s
    }
}

/// All metrics for one prediction.
pub fn evaluate(
    pred: &LabelMap,
    gt: &LabelMap,
    labels: usize,
    trimap_widths: &[usize],
    voc: bool,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    report.push("global", global_accuracy(pred, gt)?);
    report.push("average", average_accuracy(pred, gt, labels)?);
    for &w in trimap_widths {
        report.push(format!("trimap_{w}"), trimap_error(pred, gt, w)?);
    }
    if voc {
        let score = voc_iou(pred, gt, labels)?;
        report.push("voc_mean", score.mean);
        for (c, s) in score.per_class.iter().enumerate() {
            if let Some(s) = s {
                report.push(format!("voc_class_{c}"), *s);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, labels: &[usize]) -> LabelMap {
        LabelMap::from_labels(w, h, labels).unwrap()
    }

    #[test]
    fn global_identity_and_void() {
        let gt = map(2, 2, &[0, 1, 1, 0]);
        assert_eq!(global_accuracy(&gt, &gt).unwrap(), 100.0);
        let gt = LabelMap::new(4, 1, vec![Some(0), Some(1), None, Some(1)]).unwrap();
        let pred = map(4, 1, &[0, 0, 0, 1]);
        let acc = global_accuracy(&pred, &gt).unwrap();
        assert!((acc - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn global_errors() {
        let gt = LabelMap::new(2, 1, vec![None, None]).unwrap();
        assert!(matches!(
            global_accuracy(&map(2, 1, &[0, 0]), &gt),
            Err(Error::Empty(_))
        ));
        assert!(global_accuracy(&map(1, 2, &[0, 0]), &map(2, 1, &[0, 0])).is_err());
    }

    #[test]
    fn average_half_class() {
        let gt = map(4, 1, &[0, 0, 1, 1]);
        let pred = map(4, 1, &[0, 0, 1, 0]);
        assert_eq!(average_accuracy(&pred, &gt, 2).unwrap(), 75.0);
        assert_eq!(average_accuracy(&gt, &gt, 3).unwrap(), 100.0);
    }

    #[test]
    fn trimap_strip() {
        let gt = map(4, 1, &[0, 0, 1, 1]);
        let pred = map(4, 1, &[0, 1, 1, 1]);
        assert_eq!(trimap_band(&gt, 1), vec![true; 4]);
        assert_eq!(trimap_error(&pred, &gt, 1).unwrap(), 25.0);
        assert_eq!(trimap_error(&gt, &gt, 1).unwrap(), 0.0);
    }

    #[test]
    fn trimap_uniform_is_empty() {
        let gt = map(3, 3, &[2; 9]);
        assert!(matches!(trimap_error(&gt, &gt, 2), Err(Error::EmptyBand)));
    }

    #[test]
    fn trimap_excludes_void() {
        let gt = LabelMap::new(4, 1, vec![Some(0), Some(0), None, Some(1)]).unwrap();
        // void breaks adjacency, so no boundary
        assert!(matches!(trimap_error(&gt, &gt, 1), Err(Error::EmptyBand)));
    }

    #[test]
    fn voc_excludes_empty_union() {
        let gt = map(4, 1, &[0, 0, 1, 1]);
        let score = voc_iou(&gt, &gt, 3).unwrap();
        assert_eq!(score.per_class, vec![Some(100.0), Some(100.0), None]);
        assert_eq!(score.mean, 100.0);

        let pred = map(4, 1, &[0, 1, 1, 1]);
        let score = voc_iou(&pred, &gt, 2).unwrap();
        // class 0: 1/2, class 1: 2/3
        assert_eq!(score.per_class[0], Some(50.0));
        assert!((score.per_class[1].unwrap() - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn report_formats() {
        let gt = map(4, 1, &[0, 0, 1, 1]);
        let report = evaluate(&gt, &gt, 2, &[1], true).unwrap();
        let kv = report.to_key_value();
        assert!(kv.starts_with("global=100.0\n"));
        assert!(kv.contains("trimap_1=0.0\n"));
        assert!(report.to_csv_rows("a.png").contains("a.png,voc_mean,100.000000\n"));
    }

    #[test]
    fn trimap_eight_by_eight() {
        // left half 0, right half 1, one wrong pixel at (0, 0)
        let labels: Vec<usize> = (0..64).map(|k| usize::from(k % 8 >= 4)).collect();
        let gt = map(8, 8, &labels);
        let mut pred = labels.clone();
        pred[0] = 1;
        pred[3 * 8 + 5] = 0;
        let pred = map(8, 8, &pred);
        // columns 3..=4 are boundary; width 1 adds columns 2 and 5
        assert_eq!(trimap_band(&gt, 1).iter().filter(|&&b| b).count(), 32);
        assert_eq!(trimap_error(&pred, &gt, 1).unwrap(), 100.0 / 32.0);
        assert_eq!(trimap_band(&gt, 3).iter().filter(|&&b| b).count(), 64);
        assert_eq!(trimap_error(&pred, &gt, 3).unwrap(), 200.0 / 64.0);
    }

    #[test]
    fn rare_class_pulls_average_below_global() {
        let mut gt = vec![0; 20];
        gt[19] = 1;
        let gt = map(20, 1, &gt);
        let pred = map(20, 1, &[0; 20]);
        assert!(global_accuracy(&pred, &gt).unwrap() > average_accuracy(&pred, &gt, 2).unwrap());
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        fn maps() -> impl Strategy<Value = (LabelMap, LabelMap)> {
            (2usize..9, 2usize..9).prop_flat_map(|(w, h)| {
                let cell = prop_oneof![1 => Just(None), 6 => (0usize..3).prop_map(Some)];
                (
                    proptest::collection::vec(cell, w * h),
                    proptest::collection::vec((0usize..3).prop_map(Some), w * h),
                )
                    .prop_map(move |(g, p)| {
                        (LabelMap::new(w, h, p).unwrap(), LabelMap::new(w, h, g).unwrap())
                    })
            })
        }

        proptest! {
            #[test]
            fn metrics_in_range((pred, gt) in maps()) {
                if let Ok(v) = global_accuracy(&pred, &gt) {
                    prop_assert!((0.0..=100.0).contains(&v));
                }
                if let Ok(v) = average_accuracy(&pred, &gt, 3) {
                    prop_assert!((0.0..=100.0).contains(&v));
                }
                if let Ok(v) = voc_iou(&pred, &gt, 3) {
                    prop_assert!((0.0..=100.0).contains(&v.mean));
                }
                for w in 1..4 {
                    if let Ok(v) = trimap_error(&pred, &gt, w) {
                        prop_assert!((0.0..=100.0).contains(&v));
                    }
                }
            }

            #[test]
            fn perfect_prediction((_, gt) in maps()) {
                let pred = LabelMap::new(
                    gt.width(),
                    gt.height(),
                    gt.labels().iter().map(|l| Some(l.unwrap_or(0))).collect(),
                ).unwrap();
                if let Ok(v) = global_accuracy(&pred, &gt) {
                    prop_assert_eq!(v, 100.0);
                    prop_assert_eq!(average_accuracy(&pred, &gt, 3).unwrap(), 100.0);
                }
                for w in 1..4 {
                    if let Ok(v) = trimap_error(&gt, &gt, w) {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }

            #[test]
            fn label_permutation_invariance((pred, gt) in maps(), shift in 1usize..3) {
                let perm: Vec<usize> = (0..3).map(|k| (k + shift) % 3).collect();
                let (pp, gp) = (pred.relabeled(&perm), gt.relabeled(&perm));
                prop_assert_eq!(global_accuracy(&pred, &gt).ok(), global_accuracy(&pp, &gp).ok());
                let a = average_accuracy(&pred, &gt, 3).ok();
                let b = average_accuracy(&pp, &gp, 3).ok();
                let same = match (a, b) {
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    (x, y) => x == y,
                };
                prop_assert!(same);
                let a = voc_iou(&pred, &gt, 3).ok().map(|s| s.mean);
                let b = voc_iou(&pp, &gp, 3).ok().map(|s| s.mean);
                let same = match (a, b) {
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    (x, y) => x == y,
                };
                prop_assert!(same);
                prop_assert_eq!(trimap_error(&pred, &gt, 1).ok(), trimap_error(&pp, &gp, 1).ok());
            }

            #[test]
            fn trimap_bands_nest((pred, gt) in maps()) {
                for w in 1..4 {
                    let inner = trimap_band(&gt, w);
                    let outer = trimap_band(&gt, w + 1);
                    for (k, (&a, &b)) in inner.iter().zip(&outer).enumerate() {
                        prop_assert!(!a || b);
                        let wrong = pred.labels()[k] != gt.labels()[k];
                        prop_assert!(!(a && wrong) || b);
                    }
                }
            }
        }
    }
}
