use ddsound::channel::Path;
use ddsound::scenarios::{sound, synthetic_capture};
use ddsound::{EstimatorConfig, FrameConfig, PathSet, Threshold};

fn main() -> ddsound::Result<()> {
    // 512 delay taps x 128 Doppler taps at 20 MHz.
    let cfg = FrameConfig::with_defaults(512, 128, 20e6)?;
    let channel = PathSet::new(vec![
        Path::from_db(0.0, 0.0, 0.0, 120.0)?,
        Path::from_db(-9.0, 1.0, 0.35e-6, -410.0)?,
    ])?;
    let rx = synthetic_capture(&cfg, &channel, 30.0, 0.0, 300, 7)?;

    let est = EstimatorConfig { threshold: Threshold::AboveNoiseFloorDb(15.0), ..Default::default() };
    let result = sound(&rx, &cfg, &est, 0)?;
    for p in &result.estimates {
        println!("{:7.2} dB  {:9.3e} s  {:8.1} Hz", p.gain_db(), p.delay_s, p.doppler_hz);
    }
    Ok(())
}
