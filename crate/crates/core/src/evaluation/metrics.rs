//! Absolute relative error and inlier ratio, averaged per image and then
//! across images.

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{MvsError, Result};

pub const DEFAULT_INLIER_THRESHOLD: f64 = 1.03;

fn joint_pixels<'a>(pred: &'a DepthMap, gt: &'a DepthMap) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(MvsError::Argument(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    if let Some(i) = (0..gt.depth.len()).find(|&i| gt.valid[i] && !(gt.depth[i] > 0.0)) {
        return Err(MvsError::Data(format!(
            "ground truth pixel {i} is marked valid with depth {}",
            gt.depth[i]
        )));
    }
    Ok((0..gt.depth.len())
        .filter(move |&i| gt.valid[i] && pred.valid[i])
        .map(move |i| (pred.depth[i], gt.depth[i])))
}

/// Per-pixel `|pred - gt| / gt` (None outside the joint mask) and its mean.
pub fn abs_rel_map(pred: &DepthMap, gt: &DepthMap) -> Result<(Vec<Option<f64>>, f64)> {
    let _ = joint_pixels(pred, gt)?;
    let per_pixel: Vec<Option<f64>> = (0..gt.depth.len())
        .map(|i| (gt.valid[i] && pred.valid[i]).then(|| (pred.depth[i] - gt.depth[i]).abs() / gt.depth[i]))
        .collect();
    let (sum, n) = per_pixel
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    if n == 0 {
        return Err(MvsError::Argument("no jointly valid pixels".into()));
    }
    Ok((per_pixel, sum / n as f64))
}

#[inline]
pub fn is_inlier(pred: f64, gt: f64, thresh: f64) -> bool {
    (pred / gt).max(gt / pred) < thresh
}

/// Percentage of jointly valid pixels with `max(p/g, g/p) < thresh`.
pub fn inlier_ratio(pred: &DepthMap, gt: &DepthMap, thresh: f64) -> Result<f64> {
    let (hits, n) = joint_pixels(pred, gt)?.fold((0usize, 0usize), |(h, n), (p, g)| {
        (h + is_inlier(p, g, thresh) as usize, n + 1)
    });
    if n == 0 {
        return Err(MvsError::Argument("no jointly valid pixels".into()));
    }
    Ok(100.0 * hits as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    pub abs_rel: f64,
    pub tau: f64,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    /// Mean over images of each image's mean abs-rel.
    pub abs_rel: f64,
    /// Mean over images of each image's inlier percentage.
    pub tau: f64,
    pub tau_threshold: f64,
    pub n_valid: usize,
    pub per_image: Vec<ImageMetrics>,
    /// Images skipped for having no jointly valid pixels.
    pub excluded: usize,
}

impl DepthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }

    /// Fixed-width table with paired rel / tau columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>10} {:>10} {:>10}\n",
            "image", "rel", "tau", "pixels"
        ));
        for m in &self.per_image {
            out.push_str(&format!(
                "{:<24} {:>10.4} {:>10.2} {:>10}\n",
                m.name, m.abs_rel, m.tau, m.n_valid
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>10.2} {:>10}\n",
            "mean", self.abs_rel, self.tau, self.n_valid
        ));
        if self.excluded > 0 {
            out.push_str(&format!(
                "({} image(s) excluded: no valid pixels)\n",
                self.excluded
            ));
        }
        out
    }
}

/// Two-level average: metrics per image first, then an unweighted mean
/// across images.
pub fn depth_report(pairs: &[(String, DepthMap, DepthMap)], thresh: f64) -> Result<DepthReport> {
    let mut per_image = Vec::new();
    let mut excluded = 0;
    for (name, pred, gt) in pairs {
        let n = joint_pixels(pred, gt)?.count();
        if n == 0 {
            log::warn!("image {name}: no jointly valid pixels, excluded");
            excluded += 1;
            continue;
        }
        per_image.push(ImageMetrics {
            name: name.clone(),
            abs_rel: abs_rel_map(pred, gt)?.1,
            tau: inlier_ratio(pred, gt, thresh)?,
            n_valid: n,
        });
    }
    if per_image.is_empty() {
        return Err(MvsError::Argument("no image has valid pixels to evaluate".into()));
    }
    let k = per_image.len() as f64;
    Ok(DepthReport {
        abs_rel: per_image.iter().map(|m| m.abs_rel).sum::<f64>() / k,
        tau: per_image.iter().map(|m| m.tau).sum::<f64>() / k,
        tau_threshold: thresh,
        n_valid: per_image.iter().map(|m| m.n_valid).sum(),
        per_image,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(vals: &[f64]) -> DepthMap {
        DepthMap::from_values(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn abs_rel_examples() {
        let g = map(&[1.0, 2.0]);
        assert_eq!(abs_rel_map(&g, &g).unwrap().1, 0.0);
        assert!((abs_rel_map(&map(&[1.1]), &map(&[1.0])).unwrap().1 - 0.1).abs() < 1e-12);
        assert_eq!(abs_rel_map(&map(&[0.5]), &map(&[1.0])).unwrap().1, 0.5);

        let mut bad = map(&[1.0, 2.0]);
        bad.depth[1] = -1.0;
        assert!(matches!(abs_rel_map(&g, &bad), Err(MvsError::Data(_))));
        assert!(abs_rel_map(&g, &DepthMap::invalid(2, 1)).is_err());
    }

    #[test]
    fn inlier_examples() {
        let g = map(&[1.0, 2.0, 4.0]);
        assert_eq!(inlier_ratio(&g, &g, 1.03).unwrap(), 100.0);
        // power-of-two depths make 1.03*d and the ratio exact
        let edge = map(&[1.03, 2.0 * 1.03, 4.0 / 1.03]);
        assert_eq!(inlier_ratio(&edge, &g, 1.03).unwrap(), 0.0);
        let half = map(&[1.01, 2.0 * 1.10, 4.0 * 1.01, 1.10]);
        assert_eq!(
            inlier_ratio(&half, &map(&[1.0, 2.0, 4.0, 1.0]), 1.03).unwrap(),
            50.0
        );
    }

    #[test]
    fn report_two_level_average() {
        let a_gt = DepthMap::filled(4, 4, 1.0);
        let b_gt = DepthMap::filled(2, 1, 1.0);
        let b_pred = DepthMap::filled(2, 1, 1.2);
        let rep = depth_report(
            &[
                ("a".into(), a_gt.clone(), a_gt.clone()),
                ("b".into(), b_pred, b_gt),
                (
                    "empty".into(),
                    DepthMap::invalid(2, 2),
                    DepthMap::filled(2, 2, 1.0),
                ),
            ],
            1.03,
        )
        .unwrap();
        assert!((rep.abs_rel - 0.1).abs() < 1e-12);
        assert_eq!(rep.tau, 50.0);
        assert_eq!(rep.n_valid, 18);
        assert_eq!(rep.excluded, 1);
        assert!(rep.to_table().contains("mean"));
        let back: DepthReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);

        let single = depth_report(&[("a".into(), map(&[1.1, 1.0]), map(&[1.0, 1.0]))], 1.03).unwrap();
        assert!((single.abs_rel - 0.05).abs() < 1e-12);
        assert_eq!(single.tau, 50.0);
        assert!(depth_report(&[], 1.03).is_err());
    }
}
