use std::fs;
use std::path::Path;

use densecrf::eval::{evaluate, global_accuracy, LabelMap};
use densecrf::io::{
    load_compatibility, load_grid, load_image, load_labelmap, load_manifest_images, load_unary,
    save_compatibility, save_image, save_labelmap, save_unary, sidecar_path, Palette,
};
use densecrf::learning::{
    fit_compatibility, grid_search_kernel_params, FitConfig, SearchConfig, TrainingExample,
};
use densecrf::{map_labeling, Backend, CompatibilityMatrix, DenseCrf, KernelParams, Matrix, RgbImage, UnaryField};

const W: usize = 12;
const H: usize = 10;

fn truth() -> Vec<usize> {
    (0..W * H).map(|k| usize::from(k % W >= 6)).collect()
}

fn image() -> RgbImage {
    RgbImage::from_fn(W, H, |x, y| {
        let v = ((x * 7 + y * 3) % 11) as u8;
        if x >= 6 { [200 + v, 40, 40] } else { [40, 40 + v, 200] }
    })
    .unwrap()
}

// unaries that favour the truth except along one noisy column
fn unary() -> UnaryField {
    let t = truth();
    let costs: Vec<f64> = (0..W * H)
        .flat_map(|k| {
            let flip = k % W == 2 && (k / W) % 2 == 0;
            let good = if flip { 1 - t[k] } else { t[k] };
            (0..2).map(move |l| if l == good { 0.4 } else { 1.2 })
        })
        .collect();
    UnaryField::new(W, H, Matrix::from_vec(W * H, 2, costs).unwrap()).unwrap()
}

fn write_fixture(dir: &Path) {
    save_image(&image(), dir.join("a.png")).unwrap();
    save_image(&image(), dir.join("b.ppm")).unwrap();
    save_unary(&unary(), dir.join("a.unary")).unwrap();
    let gt = LabelMap::from_labels(W, H, &truth()).unwrap();
    save_labelmap(&gt, &Palette::generated(2).unwrap(), dir.join("a_gt.png")).unwrap();
    fs::write(
        dir.join("set.txt"),
        "# image unary truth\na.png a.unary a_gt.png\n\nb.ppm a.unary a_gt.png\n",
    )
    .unwrap();
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    assert_eq!(load_image(dir.path().join("a.png")).unwrap(), image());
    assert_eq!(load_image(dir.path().join("b.ppm")).unwrap(), image());
    let u = load_unary(dir.path().join("a.unary")).unwrap();
    // stored as f32
    let expected = unary();
    let diff = u.costs().as_slice().iter().zip(expected.costs().as_slice());
    assert!(diff.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-6);
    let gt = load_labelmap(dir.path().join("a_gt.png")).unwrap();
    assert_eq!(gt, LabelMap::from_labels(W, H, &truth()).unwrap());
    assert!(sidecar_path(&dir.path().join("a_gt.png")).exists());

    let mu = CompatibilityMatrix::new(Matrix::from_rows(&[vec![0.0, 1.5], vec![1.5, 0.25]]).unwrap()).unwrap();
    save_compatibility(&mu, dir.path().join("mu.txt")).unwrap();
    assert_eq!(load_compatibility(dir.path().join("mu.txt")).unwrap(), mu);
}

#[test]
fn missing_file_names_the_path() {
    let err = load_unary("/nonexistent/x.unary").unwrap_err().to_string();
    assert!(err.contains("/nonexistent/x.unary"), "{err}");
}

#[test]
fn inference_cleans_noisy_column() {
    let model = DenseCrf::for_image(&image(), unary(), &KernelParams::default(), Backend::Lattice).unwrap();
    let raw = LabelMap::from_labels(W, H, &unary().argmin()).unwrap();
    let gt = LabelMap::from_labels(W, H, &truth()).unwrap();
    let q = model.inference(10).unwrap();
    let pred = LabelMap::from_labels(W, H, &map_labeling(&q)).unwrap();
    assert!(global_accuracy(&raw, &gt).unwrap() < 100.0);
    assert_eq!(global_accuracy(&pred, &gt).unwrap(), 100.0);
    let report = evaluate(&pred, &gt, 2, &[1, 2], true).unwrap();
    assert_eq!(report.get("global"), Some(100.0));
}

#[test]
fn learning_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let set = load_manifest_images(dir.path().join("set.txt")).unwrap();
    assert_eq!(set.len(), 2);

    let params = KernelParams::default();
    let mut examples: Vec<TrainingExample> = set
        .iter()
        .map(|item| TrainingExample::from_labeled(item, &params, Backend::Lattice).unwrap())
        .collect();
    let mut config = FitConfig::default();
    config.optimizer.max_iterations = 5;
    let potts = CompatibilityMatrix::potts(2);
    let fit = fit_compatibility(&mut examples, &potts, &config).unwrap();
    let mu = fit.compatibility.as_matrix();
    assert_eq!(mu, &mu.transpose());
    assert!(fit.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", fit.objective);

    fs::write(dir.path().join("grid.txt"), "w1 = 0, 5\ntheta_alpha: 3 20\ntheta_beta = 10\n").unwrap();
    let grid = load_grid(dir.path().join("grid.txt")).unwrap();
    let search = SearchConfig::default();
    let first = grid_search_kernel_params(&set, &grid, &search).unwrap();
    let again = grid_search_kernel_params(&set, &grid, &search).unwrap();
    assert_eq!(first.best, again.best);
    assert_eq!(first.scores.len(), 4);
}
