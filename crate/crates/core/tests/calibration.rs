use tweezer_readout::calibrate::{calibrate, estimate_psf, CalibrationConfig};
use tweezer_readout::reconstruct::{reconstruct_optimized, threshold, ReconstructionConfig};
use tweezer_readout::sim::{make_gaussian_psf, sample_frame, NoiseModel, Occupancy, SceneSpec};
use tweezer_readout::{AtomGrid, CalibrationArtifact, Error, Image};

fn frames(spec: &SceneSpec, n: u64) -> Vec<Image> {
    (0..n).map(|i| sample_frame(spec, i).unwrap().0).collect()
}

fn cfg(rows: usize, cols: usize) -> CalibrationConfig {
    CalibrationConfig {
        rows,
        cols,
        ..CalibrationConfig::default()
    }
}

#[test]
fn noiseless_psf_recovery() {
    let mut spec = SceneSpec::square_array(4, 32.0, 31, 2.0, 20.0).unwrap();
    spec.noise = NoiseModel::None;
    spec.brightness_jitter = 0.0;
    spec.bit_depth = None;
    let imgs = frames(&spec, 20);
    let est = estimate_psf(&imgs, &spec.grid, spec.background, &cfg(4, 4)).unwrap();
    for psf in &est.per_site {
        assert!(psf.max_abs_diff(&spec.psf) <= 1e-6);
    }
    assert!(est.pooled.max_abs_diff(&spec.psf) <= 1e-6);
}

#[test]
fn poisson_psf_recovery_from_100_bright_frames() {
    let mut spec = SceneSpec::square_array(1, 32.0, 31, 2.0, 20.0).unwrap();
    spec.brightness_mean = 500.0;
    spec.brightness_jitter = 0.0;
    spec.occupancy = Occupancy::Fill(0.5);
    spec.seed = 99;
    let imgs = frames(&spec, 200);
    let bright = (0..200)
        .filter(|&i| sample_frame(&spec, i).unwrap().1.occupancy[0])
        .count();
    assert!(bright >= 90, "{bright} bright frames");
    let est = estimate_psf(&imgs, &spec.grid, spec.background, &cfg(1, 1)).unwrap();
    let err = est.pooled.max_abs_diff(&spec.psf);
    assert!(err <= 0.02, "max-abs error {err}");
}

#[test]
fn empty_site_has_insufficient_bright_frames() {
    let mut spec = SceneSpec::square_array(2, 32.0, 31, 2.0, 20.0).unwrap();
    spec.noise = NoiseModel::None;
    spec.bit_depth = None;
    spec.occupancy = Occupancy::Pattern(vec![true, true, false, true]);
    let imgs = frames(&spec, 5);
    let err = estimate_psf(&imgs, &spec.grid, spec.background, &cfg(2, 2)).unwrap_err();
    assert!(
        matches!(err, Error::InsufficientBrightFrames { row: 1, col: 0, .. }),
        "{err}"
    );
}

#[test]
fn calibrated_threshold_separates_calibration_set() {
    let spec = SceneSpec::default_10x10();
    let imgs = frames(&spec, 50);
    let art = calibrate(&imgs, &CalibrationConfig::default()).unwrap();
    art.validate().unwrap();
    let rcfg = ReconstructionConfig::default();
    for (i, img) in imgs.iter().enumerate() {
        let truth = sample_frame(&spec, i as u64).unwrap().1;
        let em = reconstruct_optimized(img, &art, &rcfg).unwrap();
        assert_eq!(
            threshold(&em, &art).mismatches(&truth.occupancy),
            0,
            "frame {i}"
        );
    }
    let back = CalibrationArtifact::from_json(&art.to_json().unwrap()).unwrap();
    assert_eq!(back, art);
}

#[test]
fn single_frame_is_rejected() {
    let spec = SceneSpec::default_10x10();
    let imgs = frames(&spec, 1);
    assert!(matches!(
        calibrate(&imgs, &CalibrationConfig::default()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn windows_past_the_frame_edge_are_rejected() {
    // spots drawn with a small stamp near the corner; a 31 px window cannot fit
    let spec = SceneSpec {
        width: 80,
        height: 80,
        grid: AtomGrid::new(2, 2, (8.0, 8.0), 30.0, 0.0).unwrap(),
        psf: make_gaussian_psf(9, 1.5).unwrap(),
        background: 10.0,
        brightness_mean: 1000.0,
        brightness_jitter: 0.0,
        occupancy: Occupancy::Fill(0.7),
        noise: NoiseModel::None,
        read_noise_sigma: 0.0,
        seed: 1,
        bit_depth: None,
        subpixel: false,
    };
    let imgs = frames(&spec, 10);
    let err = calibrate(&imgs, &cfg(2, 2)).unwrap_err();
    assert!(matches!(err, Error::WindowOutOfBounds { .. }), "{err}");
}

#[test]
fn dark_frames_fail_grid_detection() {
    let imgs = vec![Image::filled(256, 256, 10.0).unwrap(); 3];
    assert!(matches!(
        calibrate(&imgs, &CalibrationConfig::default()),
        Err(Error::GridDetectFailed { .. })
    ));
}
