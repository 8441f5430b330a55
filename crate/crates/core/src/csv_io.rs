//! Spectrum and sweep CSV files.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::measurement::NoiseSpectrum;
use crate::splitter::SweepRecord;

pub const SPECTRUM_HEADER: &str = "frequency_hz,level,excluded";
pub const SWEEP_HEADER: &str = "length_m,frequency_hz,level";

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Format {
        row,
        message: format!("{column}: {field:?} is not a number"),
    })
}

fn parse_flag(field: &str, row: usize) -> Result<bool> {
    match field.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::Format {
            row,
            message: format!("excluded: {other:?} is not true/false"),
        }),
    }
}

/// Reads a spectrum CSV. Row numbers in errors count the header as row 1.
pub fn read_spectrum_csv<R: BufRead>(reader: R) -> Result<NoiseSpectrum> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Format {
                row: 1,
                message: "missing header".into(),
            })
        }
    };
    let header = header.strip_suffix('\r').unwrap_or(&header);
    let header = header.strip_prefix('\u{feff}').unwrap_or(header);
    if header != SPECTRUM_HEADER {
        return Err(Error::Format {
            row: 1,
            message: format!("header must be {SPECTRUM_HEADER:?}, found {header:?}"),
        });
    }

    let mut out = NoiseSpectrum {
        frequencies: Vec::new(),
        linear_power: None,
        display_level: Vec::new(),
        excluded: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format {
                row,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let f = parse_number(fields[0], row, "frequency_hz")?;
        if !f.is_finite() || f < 0.0 {
            return Err(Error::Format {
                row,
                message: format!("frequency_hz = {f} must be finite and >= 0"),
            });
        }
        if let Some(&prev) = out.frequencies.last() {
            if f <= prev {
                return Err(Error::NonMonotonicFrequency { row });
            }
        }
        let level = parse_number(fields[1], row, "level")?;
        let excluded = parse_flag(fields[2], row)?;
        if !excluded && !level.is_finite() {
            return Err(Error::Format {
                row,
                message: "non-finite level on an included point".into(),
            });
        }
        out.frequencies.push(f);
        out.display_level.push(level);
        out.excluded.push(excluded);
    }
    if out.frequencies.is_empty() {
        return Err(Error::Format {
            row: 2,
            message: "no records".into(),
        });
    }
    Ok(out)
}

pub fn write_spectrum_csv<W: Write>(spectrum: &NoiseSpectrum, mut writer: W) -> Result<()> {
    writeln!(writer, "{SPECTRUM_HEADER}")?;
    for ((f, level), ex) in spectrum
        .frequencies
        .iter()
        .zip(&spectrum.display_level)
        .zip(&spectrum.excluded)
    {
        let level = if *ex { f64::NAN } else { *level };
        writeln!(writer, "{f:.16e},{level:.16e},{ex}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut writer: W) -> Result<()> {
    writeln!(writer, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(
            writer,
            "{:.16e},{:.16e},{:.16e}",
            r.length, r.frequency, r.power
        )?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_spectrum_file(path: &Path) -> Result<NoiseSpectrum> {
    let file = std::fs::File::open(path)?;
    read_spectrum_csv(std::io::BufReader::new(file))
}

pub fn write_spectrum_file(path: &Path, spectrum: &NoiseSpectrum) -> Result<()> {
    write_atomic(path, |w| write_spectrum_csv(spectrum, w))
}

pub fn write_sweep_file(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_atomic(path, |w| write_sweep_csv(records, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(levels: Vec<f64>) -> NoiseSpectrum {
        let n = levels.len();
        NoiseSpectrum {
            frequencies: (0..n).map(|i| 1e6 + i as f64 * 12_345.678_9).collect(),
            linear_power: None,
            display_level: levels,
            excluded: vec![false; n],
        }
    }

    fn round_trip(s: &NoiseSpectrum) -> NoiseSpectrum {
        let mut buf = Vec::new();
        write_spectrum_csv(s, &mut buf).unwrap();
        read_spectrum_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn empty_body() {
        let err = read_spectrum_csv("frequency_hz,level,excluded\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { ref message, .. } if message == "no records"));
    }

    #[test]
    fn crlf_and_excluded() {
        let text = "frequency_hz,level,excluded\r\n1e6,0.5,false\r\n2e6,NaN,true\r\n";
        let s = read_spectrum_csv(text.as_bytes()).unwrap();
        assert_eq!(s.frequencies, vec![1e6, 2e6]);
        assert!(s.display_level[1].is_nan());
        assert_eq!(s.excluded, vec![false, true]);
        let mut buf = Vec::new();
        write_spectrum_csv(&s, &mut buf).unwrap();
        assert!(!buf.contains(&b'\r'));
    }

    #[test]
    fn out_of_order_row() {
        let text = "frequency_hz,level,excluded\n1,0,false\n3,0,false\n2,0,false\n4,0,false\n";
        assert!(matches!(
            read_spectrum_csv(text.as_bytes()),
            Err(Error::NonMonotonicFrequency { row: 4 })
        ));
        let dup = "frequency_hz,level,excluded\n1,0,false\n1,0,false\n";
        assert!(matches!(
            read_spectrum_csv(dup.as_bytes()),
            Err(Error::NonMonotonicFrequency { row: 3 })
        ));
    }

    #[test]
    fn bad_header_and_rows() {
        assert!(read_spectrum_csv("freq,level,excluded\n1,0,false\n".as_bytes()).is_err());
        assert!(read_spectrum_csv("".as_bytes()).is_err());
        let err =
            read_spectrum_csv("frequency_hz,level,excluded\n1,0,false\n2,1.0.0,false\n".as_bytes())
                .unwrap_err();
        assert!(matches!(err, Error::Format { row: 3, .. }));
        let err = read_spectrum_csv("frequency_hz,level,excluded\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format { row: 2, .. }));
    }

    #[test]
    fn thousand_point_round_trip_is_bit_identical() {
        let levels: Vec<f64> = (0..1000)
            .map(|i| -1.754 + (i as f64 * 0.731).sin() * std::f64::consts::PI / 7.0)
            .collect();
        let s = sample(levels);
        let back = round_trip(&s);
        for (a, b) in s.display_level.iter().zip(&back.display_level) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(s.frequencies, back.frequencies);
    }

    #[test]
    fn sweep_rows() {
        let recs: Vec<SweepRecord> = (0..6)
            .map(|i| SweepRecord {
                length: (i / 3) as f64,
                frequency: 1e6 * (i % 3 + 1) as f64,
                power: 0.25,
            })
            .collect();
        let mut buf = Vec::new();
        write_sweep_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert_eq!(text.lines().next(), Some(SWEEP_HEADER));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "old").unwrap();
        write_spectrum_file(&path, &sample(vec![1.0, 2.0])).unwrap();
        let back = read_spectrum_file(&path).unwrap();
        assert_eq!(back.display_level, vec![1.0, 2.0]);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn any_finite_level_round_trips(levels in prop::collection::vec(-1e300f64..1e300, 1..50)) {
            let s = sample(levels);
            let back = round_trip(&s);
            for (a, b) in s.display_level.iter().zip(&back.display_level) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
