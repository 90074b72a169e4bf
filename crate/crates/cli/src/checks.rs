//! Built-in assertions run under `--check`.

use ddsound::scenarios::{
    CfoRow, NmseRow, PaprRow, PureDopplerReport, RidgeReport, SyncGainRow, PURE_DOPPLER_DOPPLERS_HZ,
    PURE_DOPPLER_DELAYS_S, PURE_DOPPLER_POWERS_DB, RAYLEIGH_MAX_DOPPLERS_HZ, RAYLEIGH_POWERS_DB,
};
use ddsound::{FrameConfig, SoundingCapability};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
}

/// Internal consistency of the capability metrics.
pub fn capability(cfg: &FrameConfig, cap: &SoundingCapability) -> Vec<Check> {
    let b = cfg.bandwidth_hz();
    let expected_len = (cfg.m() * cfg.n()) as f64 / b;
    vec![
        Check::new(
            "delay resolution is 1/B",
            close(cap.delay_resolution_s * b, 1.0, 1e-12),
            format!("{:e} s", cap.delay_resolution_s),
        ),
        Check::new(
            "frame length is MN/B",
            close(cap.frame_length_s, expected_len, 1e-12),
            format!("{:e} s", cap.frame_length_s),
        ),
        Check::new(
            "Doppler resolution is the inverse frame length",
            close(cap.doppler_resolution_hz * cap.frame_length_s, 1.0, 1e-12),
            format!("{} Hz", cap.doppler_resolution_hz),
        ),
        Check::new(
            "max Doppler spans N/2 bins",
            close(cap.max_doppler_hz, cap.doppler_resolution_hz * (cfg.n() / 2) as f64, 1e-12),
            format!("{} Hz", cap.max_doppler_hz),
        ),
        Check::new(
            "max delay spans the guard band",
            close(cap.max_delay_s, cap.delay_resolution_s * cfg.l_tau() as f64, 1e-12),
            format!("{:e} s", cap.max_delay_s),
        ),
    ]
}

pub fn papr(rows: &[PaprRow]) -> Vec<Check> {
    let Some(last) = rows.iter().max_by_key(|r| r.m) else {
        return vec![Check::new("sweep is nonempty", false, "no rows")];
    };
    let bad: Vec<usize> = rows
        .iter()
        .filter(|r| !(r.single_pilot_db > r.designed_db && r.designed_db > r.full_pn_db))
        .map(|r| r.m)
        .collect();
    let worst = rows.iter().max_by(|a, b| a.designed_db.total_cmp(&b.designed_db)).unwrap_or(last);
    let pn_gap = last.designed_db - last.full_pn_db;
    let pilot_gap = last.single_pilot_db - last.designed_db;
    vec![
        Check::new("single pilot > designed > full PN at every M", bad.is_empty(), format!("violations at M = {bad:?}")),
        Check::new(
            "designed PAPR below 15 dB at every M",
            worst.designed_db < 15.0,
            format!("worst {:.2} dB at M = {}", worst.designed_db, worst.m),
        ),
        Check::new("designed vs full-PN gap 3 +/- 1.5 dB", (pn_gap - 3.0).abs() <= 1.5, format!("{pn_gap:.2} dB")),
        Check::new(
            "single-pilot vs designed gap 20 +/- 3 dB",
            (pilot_gap - 20.0).abs() <= 3.0,
            format!("{pilot_gap:.2} dB"),
        ),
    ]
}

pub fn sync_gain(rows: &[SyncGainRow]) -> Vec<Check> {
    let mut snr_bad = Vec::new();
    let mut sizes: Vec<(usize, usize)> = rows.iter().map(|r| (r.m, r.n)).collect();
    sizes.dedup();
    for &(m, n) in &sizes {
        let mut at: Vec<&SyncGainRow> = rows.iter().filter(|r| (r.m, r.n) == (m, n)).collect();
        at.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        if at.windows(2).any(|w| w[1].mean_gain_db <= w[0].mean_gain_db) {
            snr_bad.push((m, n));
        }
    }
    let mut snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut size_bad = Vec::new();
    for &snr in &snrs {
        let mut at: Vec<&SyncGainRow> = rows.iter().filter(|r| r.snr_db == snr).collect();
        at.sort_by_key(|r| (r.m * r.n, r.m));
        if at.windows(2).any(|w| w[1].mean_gain_db <= w[0].mean_gain_db) {
            size_bad.push(snr);
        }
    }
    let worst = rows
        .iter()
        .filter(|r| r.snr_db >= 0.0)
        .map(|r| r.detection_rate)
        .fold(1.0, f64::min);
    vec![
        Check::new("gain increases with SNR", snr_bad.is_empty(), format!("violations at sizes {snr_bad:?}")),
        Check::new("gain increases with frame size", size_bad.is_empty(), format!("violations at SNR {size_bad:?} dB")),
        Check::new("detection >= 99% at SNR >= 0 dB", worst >= 0.99, format!("worst rate {worst:.3}")),
    ]
}

pub fn dynamic_range(rows: &[CfoRow]) -> Vec<Check> {
    let dd: Vec<f64> = rows.iter().map(|r| r.dd_dynamic_range_db).collect();
    let spread = dd.iter().copied().fold(f64::NEG_INFINITY, f64::max) - dd.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = rows
        .iter()
        .filter(|r| r.cfo_bins.fract() == 0.0)
        .all(|r| r.dd_peak_doppler_tap == r.cfo_bins as i64);
    let mut by_cfo: Vec<&CfoRow> = rows.iter().collect();
    by_cfo.sort_by(|a, b| a.cfo_bins.total_cmp(&b.cfo_bins));
    let monotone = by_cfo.windows(2).all(|w| w[1].ofdm_dynamic_range_db <= w[0].ofdm_dynamic_range_db);
    let drop = match (by_cfo.first(), by_cfo.last()) {
        (Some(a), Some(b)) => a.ofdm_dynamic_range_db - b.ofdm_dynamic_range_db,
        _ => 0.0,
    };
    vec![
        Check::new("DD dynamic range varies < 1 dB", spread < 1.0, format!("spread {spread:.3} dB")),
        Check::new("DD peak shifts by the CFO bin count", shifted, String::new()),
        Check::new("OFDM dynamic range non-increasing in CFO", monotone, String::new()),
        Check::new("OFDM dynamic range drops >= 10 dB", drop >= 10.0, format!("drop {drop:.2} dB")),
    ]
}

pub fn nmse(rows: &[NmseRow]) -> Vec<Check> {
    let mut steps: Vec<f64> = rows.iter().map(|r| r.step).collect();
    steps.sort_by(|a, b| b.total_cmp(a));
    steps.dedup();
    type Metric = fn(&NmseRow) -> f64;
    let metrics: [(&str, Metric); 2] = [("index", |r| r.index_nmse), ("amplitude", |r| r.amplitude_nmse)];
    let mut out = Vec::new();
    for (name, metric) in metrics {
        let mut bad = Vec::new();
        for &step in &steps {
            let mut at: Vec<&NmseRow> = rows.iter().filter(|r| r.step == step).collect();
            at.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
            if at.windows(2).any(|w| metric(w[1]) > metric(w[0])) {
                bad.push(step);
            }
        }
        out.push(Check::new(
            format!("{name} NMSE non-increasing in SNR"),
            bad.is_empty(),
            format!("violations at steps {bad:?}"),
        ));
        let top = rows.iter().map(|r| r.snr_db).fold(f64::NEG_INFINITY, f64::max);
        let series: Vec<f64> =
            steps.iter().filter_map(|&s| rows.iter().find(|r| r.step == s && r.snr_db == top)).map(metric).collect();
        out.push(Check::new(
            format!("{name} NMSE non-increasing as the step shrinks at {top} dB"),
            series.windows(2).all(|w| w[1] <= w[0]),
            format!("{series:?}"),
        ));
    }
    out
}

pub fn rayleigh(ridges: &[RidgeReport], doppler_bin_hz: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for ((r, &power), &f_max) in ridges.iter().zip(&RAYLEIGH_POWERS_DB).zip(&RAYLEIGH_MAX_DOPPLERS_HZ) {
        out.push(Check::new(
            format!("ridge at {:e} s power", r.delay_s),
            (r.relative_power_db - power).abs() <= 0.5,
            format!("{:.3} dB vs {power} dB", r.relative_power_db),
        ));
        let err = (r.doppler_low_hz + f_max).abs().max((r.doppler_high_hz - f_max).abs());
        out.push(Check::new(
            format!("ridge at {:e} s Doppler edges", r.delay_s),
            err <= doppler_bin_hz,
            format!("[{:.2}, {:.2}] Hz vs +/-{f_max} Hz", r.doppler_low_hz, r.doppler_high_hz),
        ));
    }
    out
}

pub fn pure_doppler(report: &PureDopplerReport) -> Vec<Check> {
    let third = report.raw_relative_db.get(2).copied().unwrap_or(f64::NAN);
    let mut out = vec![Check::new(
        "raw CSF third path at -13.37 +/- 1 dB",
        (third + 13.37).abs() <= 1.0,
        format!("{third:.2} dB"),
    )];
    for ((&delay, &doppler), &power) in PURE_DOPPLER_DELAYS_S.iter().zip(&PURE_DOPPLER_DOPPLERS_HZ).zip(&PURE_DOPPLER_POWERS_DB) {
        let nearest = report.estimates.iter().min_by(|a, b| {
            let d = |e: &ddsound::PathEstimate| ((e.delay_s - delay) / 1.25e-9).powi(2) + ((e.doppler_hz - doppler) / 2.0).powi(2);
            d(a).total_cmp(&d(b))
        });
        let (passed, detail) = match nearest {
            Some(e) => {
                let rel = e.gain_db();
                (
                    (e.delay_s - delay).abs() <= 1.25e-9
                        && (e.doppler_hz - doppler).abs() <= 2.0
                        && (rel - power).abs() <= 0.5,
                    format!("{:.4e} s, {:.2} Hz, {rel:.2} dB", e.delay_s, e.doppler_hz),
                )
            }
            None => (false, "no estimates".into()),
        };
        out.push(Check::new(format!("path at {delay:e} s / {doppler} Hz recovered"), passed, detail));
    }
    out
}
