use crate::error::{Error, Result};
use crate::filter::FeatureMatrix;
use crate::image::RgbImage;
use crate::matrix::Matrix;

fn check_theta(name: &str, theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {theta}"
        )))
    }
}

/// Per pixel `(x/θα, y/θα, r/θβ, g/θβ, b/θβ)`, positions in pixels and
/// colors on the 0–255 scale.
pub fn build_appearance_features(
    image: &RgbImage,
    theta_alpha: f64,
    theta_beta: f64,
) -> Result<FeatureMatrix> {
    check_theta("theta_alpha", theta_alpha)?;
    check_theta("theta_beta", theta_beta)?;
    let mut points = Matrix::zeros(image.len(), 5);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let i = y * image.width() + x;
            let [r, g, b] = image.get(x, y);
            points.row_mut(i).copy_from_slice(&[
                x as f64 / theta_alpha,
                y as f64 / theta_alpha,
                r as f64 / theta_beta,
                g as f64 / theta_beta,
                b as f64 / theta_beta,
            ]);
        }
    }
    FeatureMatrix::new(points)
}

/// Per pixel `(x/θγ, y/θγ)` in row-major order.
pub fn build_smoothness_features(
    width: usize,
    height: usize,
    theta_gamma: f64,
) -> Result<FeatureMatrix> {
    check_theta("theta_gamma", theta_gamma)?;
    if width == 0 || height == 0 {
        return Err(Error::Empty(format!("grid is {width}x{height}")));
    }
    let mut points = Matrix::zeros(width * height, 2);
    for y in 0..height {
        for x in 0..width {
            points
                .row_mut(y * width + x)
                .copy_from_slice(&[x as f64 / theta_gamma, y as f64 / theta_gamma]);
        }
    }
    FeatureMatrix::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appearance_scaling() {
        let img = RgbImage::new(1, 1, vec![[255, 0, 0]]).unwrap();
        let f = build_appearance_features(&img, 61.0, 11.0).unwrap();
        let p = f.point(0);
        assert_eq!(&p[..2], &[0.0, 0.0]);
        assert!((p[2] - 23.181818181818183).abs() < 1e-12);
        assert_eq!(&p[3..], &[0.0, 0.0]);
    }

    #[test]
    fn appearance_identity_scaling() {
        let img = RgbImage::from_fn(5, 5, |_, _| [0, 0, 0]).unwrap();
        let f = build_appearance_features(&img, 1.0, 1.0).unwrap();
        assert_eq!(f.point(4 * 5 + 3), &[3.0, 4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn appearance_equal_pixels_equal_rows() {
        let img = RgbImage::filled(2, 1, [10, 20, 30]).unwrap();
        let f = build_appearance_features(&img, 1e9, 3.0).unwrap();
        // positions differ by 1e-9 only
        assert!((f.point(0)[0] - f.point(1)[0]).abs() < 1e-8);
        assert_eq!(&f.point(0)[2..], &f.point(1)[2..]);
    }

    #[test]
    fn smoothness_scaling() {
        let f = build_smoothness_features(8, 8, 1.0).unwrap();
        assert_eq!(f.point(7 * 8 + 5), &[5.0, 7.0]);
        let f = build_smoothness_features(11, 1, 5.0).unwrap();
        assert_eq!(f.point(10), &[2.0, 0.0]);
    }

    #[test]
    fn smoothness_row_major() {
        let f = build_smoothness_features(2, 2, 1.0).unwrap();
        let rows: Vec<&[f64]> = (0..4).map(|i| f.point(i)).collect();
        assert_eq!(
            rows,
            vec![&[0.0, 0.0][..], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]
        );
    }

    #[test]
    fn rejects_bad_theta() {
        let img = RgbImage::filled(1, 1, [0, 0, 0]).unwrap();
        assert!(build_appearance_features(&img, 0.0, 1.0).is_err());
        assert!(build_appearance_features(&img, 1.0, -1.0).is_err());
        assert!(build_smoothness_features(2, 2, 0.0).is_err());
    }
}
