//! Binary IQ/CSF formats and CSV/JSON exports.
//!
//! DDIQ: 32-byte little-endian header (`"DDIQ"`, `u32` version,
//! `f64` sample rate, `u64` sample count, 8 zero bytes) followed by
//! interleaved `f32` I/Q pairs.
//!
//! DDCF: 48-byte little-endian header (`"DDCF"`, `u32` version, `u64` N,
//! `u64` columns `l_tau + 1`, `f64` Δτ, `f64` Δν, `f64` noise floor)
//! followed by row-major `f32` I/Q cells.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use num_complex::Complex64;

use crate::analysis::{FrameStatistics, PowerProfile};
use crate::channel::PathSet;
use crate::error::{Error, Result};
use crate::estimation::PathEstimate;
use crate::frame::FrameConfig;
use crate::receiver::Csf;
use crate::waveform::IqBuffer;

pub const IQ_MAGIC: &[u8; 4] = b"DDIQ";
pub const CSF_MAGIC: &[u8; 4] = b"DDCF";
pub const FORMAT_VERSION: u32 = 1;
const IQ_HEADER_LEN: u64 = 32;
const CSF_HEADER_LEN: u64 = 48;
const CELL_BYTES: u64 = 8;

fn read_exact_or_truncated(reader: &mut impl Read, buf: &mut [u8], expected: u64, consumed: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..])? {
            0 => return Err(Error::Truncated { expected, actual: consumed + filled as u64 }),
            n => filled += n,
        }
    }
    Ok(())
}

fn write_cells(writer: &mut impl Write, cells: &[Complex64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(cells.len() * CELL_BYTES as usize);
    for c in cells {
        bytes.extend_from_slice(&(c.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    writer.write_all(&bytes)?;
    Ok(())
}

/// Reads `count` cells and checks that nothing follows them.
fn read_cells(reader: &mut impl Read, count: u64, header_len: u64) -> Result<Vec<Complex64>> {
    let expected = header_len + count * CELL_BYTES;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let actual = header_len + bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::Format(format!(
            "sample count mismatch: header declares {count} samples ({expected} bytes) but the file holds {actual} bytes"
        )));
    }
    Ok(bytes
        .chunks_exact(CELL_BYTES as usize)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

fn check_magic(found: &[u8], magic: &[u8; 4], version: u32) -> Result<()> {
    if found != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            String::from_utf8_lossy(magic)
        )));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn write_iq_to(buf: &IqBuffer, writer: &mut impl Write) -> Result<()> {
    let mut header = Vec::with_capacity(IQ_HEADER_LEN as usize);
    header.extend_from_slice(IQ_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&buf.sample_rate().to_le_bytes());
    header.extend_from_slice(&(buf.len() as u64).to_le_bytes());
    header.extend_from_slice(&[0u8; 8]);
    writer.write_all(&header)?;
    write_cells(writer, buf.samples())
}

pub fn read_iq_from(reader: &mut impl Read) -> Result<IqBuffer> {
    let mut header = [0u8; IQ_HEADER_LEN as usize];
    read_exact_or_truncated(reader, &mut header, IQ_HEADER_LEN, 0)?;
    check_magic(&header[..4], IQ_MAGIC, u32_at(&header, 4))?;
    let sample_rate = f64_at(&header, 8);
    let count = u64_at(&header, 16);
    let samples = read_cells(reader, count, IQ_HEADER_LEN)?;
    IqBuffer::new(samples, sample_rate)
}

/// Writes `buf` as DDIQ. Samples are stored as `f32`.
pub fn write_iq(buf: &IqBuffer, path: impl AsRef<FsPath>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_iq_to(buf, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_iq(path: impl AsRef<FsPath>) -> Result<IqBuffer> {
    read_iq_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_csf_to(csf: &Csf, writer: &mut impl Write) -> Result<()> {
    let cfg = csf.cfg();
    let mut header = Vec::with_capacity(CSF_HEADER_LEN as usize);
    header.extend_from_slice(CSF_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(csf.rows() as u64).to_le_bytes());
    header.extend_from_slice(&(csf.cols() as u64).to_le_bytes());
    header.extend_from_slice(&cfg.delay_resolution().to_le_bytes());
    header.extend_from_slice(&cfg.doppler_resolution().to_le_bytes());
    header.extend_from_slice(&csf.noise_floor_estimate().to_le_bytes());
    writer.write_all(&header)?;
    write_cells(writer, csf.data())
}

/// Reads a DDCF matrix. The frame is rebuilt as `B = 1/Δτ`,
/// `M = 1/(Δτ·Δν·N)`, `l_tau = columns - 1` and unit PN amplitude.
pub fn read_csf_from(reader: &mut impl Read) -> Result<Csf> {
    let mut header = [0u8; CSF_HEADER_LEN as usize];
    read_exact_or_truncated(reader, &mut header, CSF_HEADER_LEN, 0)?;
    check_magic(&header[..4], CSF_MAGIC, u32_at(&header, 4))?;
    let n = u64_at(&header, 8);
    let cols = u64_at(&header, 16);
    let dt = f64_at(&header, 24);
    let dv = f64_at(&header, 32);
    let floor = f64_at(&header, 40);
    if n == 0 || cols == 0 || !(dt > 0.0 && dv > 0.0) {
        return Err(Error::Format(format!("invalid CSF header: N={n}, columns={cols}, Δτ={dt}, Δν={dv}")));
    }
    let m = (1.0 / (dt * dv * n as f64)).round() as usize;
    let cfg = FrameConfig::new(m, n as usize, 1.0 / dt, cols as usize - 1, 1.0)?;
    let cells = read_cells(reader, n * cols, CSF_HEADER_LEN)?;
    Csf::new(cfg, cells, floor)
}

pub fn write_csf(csf: &Csf, path: impl AsRef<FsPath>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csf_to(csf, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_csf(path: impl AsRef<FsPath>) -> Result<Csf> {
    read_csf_from(&mut BufReader::new(File::open(path)?))
}

fn power_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// CSF cells as `doppler_hz, delay_s, power_db, phase_rad`, rows in ascending Doppler.
pub fn write_csf_csv(csf: &Csf, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["doppler_hz", "delay_s", "power_db", "phase_rad"])?;
    for r in 0..csf.rows() {
        for c in 0..csf.cols() {
            let v = csf.get(r, c);
            w.serialize((csf.doppler_hz(r), csf.delay_s(c), power_db(v.norm_sqr()), v.arg()))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimates_csv(estimates: &[PathEstimate], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_index", "delay_s", "doppler_hz", "gain_db", "phase_rad", "k_I", "l_I", "k_F", "l_F"])?;
    for (i, e) in estimates.iter().enumerate() {
        w.serialize((
            i,
            e.delay_s,
            e.doppler_hz,
            e.gain_db(),
            e.phase,
            e.integer_taps.0,
            e.integer_taps.1,
            e.fractional_taps.0,
            e.fractional_taps.1,
        ))?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns: the axis (`delay_s` or `doppler_hz`) and `power_db`.
pub fn write_profile_csv(profile: &PowerProfile, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let axis = match profile.kind {
        crate::analysis::ProfileKind::Delay => "delay_s",
        crate::analysis::ProfileKind::Doppler => "doppler_hz",
    };
    w.write_record([axis, "power_db"])?;
    for (a, p) in profile.axis.iter().zip(&profile.power) {
        w.serialize((a, power_db(*p)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_statistics_csv(rows: &[FrameStatistics], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["frame_index", "n_mpcs", "kf_db", "rms_ds_s", "rms_dps_hz"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_set(path: impl AsRef<FsPath>) -> Result<PathSet> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_path_set(set: &PathSet, path: impl AsRef<FsPath>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, set)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ProfileKind;

    fn f32_buffer(len: usize) -> IqBuffer {
        let samples = (0..len)
            .map(|i| Complex64::new((i as f32 * 0.37).sin() as f64, (i as f32 * 1.1).cos() as f64))
            .collect();
        IqBuffer::new(samples, 80e6).unwrap()
    }

    #[test]
    fn iq_round_trip_and_header() {
        let buf = f32_buffer(1000);
        let mut bytes = Vec::new();
        write_iq_to(&buf, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 8000);
        assert_eq!(&bytes[..4], b"DDIQ");
        assert_eq!(u64_at(&bytes, 16), 1000);
        assert_eq!(read_iq_from(&mut bytes.as_slice()).unwrap(), buf);
    }

    #[test]
    fn iq_empty_payload() {
        let buf = IqBuffer::new(vec![], 1e6).unwrap();
        let mut bytes = Vec::new();
        write_iq_to(&buf, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 32);
        let back = read_iq_from(&mut bytes.as_slice()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.sample_rate(), 1e6);
    }

    #[test]
    fn iq_errors() {
        let mut bytes = Vec::new();
        write_iq_to(&f32_buffer(10), &mut bytes).unwrap();
        let err = read_iq_from(&mut &bytes[..100]).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 112, actual: 100 }), "{err}");
        assert!(err.to_string().contains("112") && err.to_string().contains("100"));
        assert!(matches!(read_iq_from(&mut &bytes[..20]), Err(Error::Truncated { expected: 32, actual: 20 })));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_iq_from(&mut bad.as_slice()), Err(Error::Format(_))));

        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 8]);
        assert!(matches!(read_iq_from(&mut long.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csf_round_trip() {
        let cfg = FrameConfig::with_defaults(64, 16, 2e6).unwrap();
        let cells = (0..16 * 17).map(|i| Complex64::new(i as f64 * 0.5, -(i as f64))).collect();
        let csf = Csf::new(cfg, cells, 0.25).unwrap();
        let mut bytes = Vec::new();
        write_csf_to(&csf, &mut bytes).unwrap();
        assert_eq!(bytes.len() as u64, 48 + 16 * 17 * 8);
        let back = read_csf_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, csf);
        assert!(matches!(read_csf_from(&mut &bytes[..60]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn csv_layouts() {
        let cfg = FrameConfig::with_defaults(16, 4, 1e6).unwrap();
        let est = [PathEstimate::from_taps(&cfg, 1.25, 2.5, Complex64::new(0.5, 0.0))];
        let mut out = Vec::new();
        write_estimates_csv(&est, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "path_index,delay_s,doppler_hz,gain_db,phase_rad,k_I,l_I,k_F,l_F");
        assert!(lines.next().unwrap().starts_with("0,"));

        let profile = PowerProfile::new(vec![0.0, 1.0], vec![1.0, 0.1], ProfileKind::Doppler).unwrap();
        let mut out = Vec::new();
        write_profile_csv(&profile, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "doppler_hz,power_db\n0.0,0.0\n1.0,-10.0\n");

        let stats = FrameStatistics { frame_index: 3, n_mpcs: 2, kf_db: 1.5, rms_ds_s: 1e-7, rms_dps_hz: 4.0 };
        let mut out = Vec::new();
        write_statistics_csv(&[stats], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("frame_index,n_mpcs,kf_db,rms_ds_s,rms_dps_hz\n3,2,1.5,"));
    }
}
