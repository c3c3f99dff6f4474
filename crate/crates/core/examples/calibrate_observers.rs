//! Re-derives the reference observer noise constants.
//!
//! cargo run --release -p quadstretch --example calibrate_observers

use quadstretch::psychophysics::{
    calibrate_channel_sigma, calibrate_sigma, mean_weber, RunLimits, Session,
    DISCRIMINATION_AMPLITUDE, JND_REFERENCE, TARGET_IDENTIFICATION_ACCURACY, TARGET_WEBER,
};

fn main() {
    let limits = RunLimits::default();
    let sigma = calibrate_sigma(TARGET_WEBER, JND_REFERENCE, 400, 2024).expect("calibration");
    let (weber, failed) = mean_weber(JND_REFERENCE, sigma, 400, 2024, &limits).expect("check");
    println!("noise_sigma = {sigma:.6}  (mean weber {weber:.4}, {failed} failed runs)");

    let channel = calibrate_channel_sigma(
        TARGET_IDENTIFICATION_ACCURACY,
        Session::SidesAndTypes,
        DISCRIMINATION_AMPLITUDE,
        2000,
        2024,
    )
    .expect("calibration");
    println!("channel_sigma = {channel:.6}");
}
