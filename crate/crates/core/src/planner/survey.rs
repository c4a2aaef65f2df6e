use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One fabricated nanowire as measured before selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NanowireRecord {
    pub id: u32,
    /// Chip edge 0–3 (bottom, right, top, left, counter-clockwise).
    pub edge: u8,
    pub slot: u32,
    /// Room-temperature resistance, ohms; `None` for an open wire.
    pub r_room: Option<f64>,
    /// Critical current, amperes; `None` if not measured.
    pub i_c: Option<f64>,
}

impl NanowireRecord {
    pub fn is_eligible(&self) -> bool {
        self.r_room.is_some() && self.i_c.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("survey line {line}: {message}")]
pub struct SurveyError {
    pub line: usize,
    pub message: String,
}

pub const SURVEY_HEADER: [&str; 5] = ["id", "edge", "slot", "r_ohm", "ic_ua"];

/// Parses a survey CSV (`id,edge,slot,r_ohm,ic_ua`; blank cell = none).
/// Row order is preserved.
pub fn load_survey(text: &str) -> Result<Vec<NanowireRecord>, SurveyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| SurveyError {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != SURVEY_HEADER {
        return Err(SurveyError {
            line: 1,
            message: format!("expected header '{}'", SURVEY_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SurveyError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| SurveyError { line, message };
        if rec.len() != SURVEY_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", SURVEY_HEADER.len(), rec.len())));
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let required = |i: usize| -> Result<u64, SurveyError> {
            field(i)
                .parse::<u64>()
                .map_err(|e| err(format!("{}: '{}' ({e})", SURVEY_HEADER[i], field(i))))
        };
        let optional = |i: usize| -> Result<Option<f64>, SurveyError> {
            match field(i) {
                "" => Ok(None),
                v => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => Ok(Some(x)),
                    Ok(_) => Err(err(format!("{}: '{v}' is not a non-negative number", SURVEY_HEADER[i]))),
                    Err(e) => Err(err(format!("{}: '{v}' ({e})", SURVEY_HEADER[i]))),
                },
            }
        };
        let edge = required(1)?;
        if edge > 3 {
            return Err(err(format!("edge must be 0-3, got {edge}")));
        }
        out.push(NanowireRecord {
            id: u32::try_from(required(0)?).map_err(|e| err(format!("id: {e}")))?,
            edge: edge as u8,
            slot: u32::try_from(required(2)?).map_err(|e| err(format!("slot: {e}")))?,
            r_room: optional(3)?,
            i_c: optional(4)?.map(|ua| ua * 1e-6),
        });
    }
    Ok(out)
}

pub fn survey_to_csv(records: &[NanowireRecord]) -> String {
    let mut s = SURVEY_HEADER.join(",");
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.id,
            r.edge,
            r.slot,
            r.r_room.map(|v| format!("{v:.1}")).unwrap_or_default(),
            r.i_c.map(|v| format!("{:.3}", v * 1e6)).unwrap_or_default()
        );
    }
    s
}

/// Shape of a synthetic survey.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyModel {
    pub per_edge: u32,
    pub mean_r: f64,
    pub mean_ic: f64,
    /// Relative amplitude of the smooth position-dependent drift.
    pub drift: f64,
    /// Relative white noise on top of the drift.
    pub noise: f64,
    /// Fraction of open (infinite-resistance) wires.
    pub open_fraction: f64,
    /// Number of wires whose critical current was measured.
    pub ic_measured: usize,
}

impl Default for SurveyModel {
    fn default() -> Self {
        SurveyModel {
            per_edge: 44,
            mean_r: 3.6e6,
            mean_ic: 13.0e-6,
            drift: 0.06,
            noise: 0.025,
            open_fraction: 0.04,
            ic_measured: 150,
        }
    }
}

/// Survey with smooth drift around the chip perimeter plus noise, a few open
/// wires, and critical currents only for the first `ic_measured` wires.
pub fn synthetic_survey(model: &SurveyModel, seed: u64) -> Vec<NanowireRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.noise).expect("finite noise");
    let n = 4 * model.per_edge;
    let phase_r: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let phase_ic: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    (0..n)
        .map(|k| {
            let u = k as f64 / n as f64 * std::f64::consts::TAU;
            let open = rng.random::<f64>() < model.open_fraction;
            let r = model.mean_r * (1.0 + model.drift * (u + phase_r).sin() + noise.sample(&mut rng));
            // thinner film regions: higher resistance, lower critical current
            let ic = model.mean_ic
                * (1.0 - model.drift * (u + phase_r).sin() * 0.5 + model.drift * (2.0 * u + phase_ic).cos() * 0.5
                    + noise.sample(&mut rng));
            NanowireRecord {
                id: k,
                edge: (k / model.per_edge) as u8,
                slot: k % model.per_edge,
                r_room: (!open).then_some(r),
                i_c: (!open && (k as usize) < model.ic_measured).then_some(ic),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_176_round_trip() {
        let recs = synthetic_survey(&SurveyModel::default(), 7);
        assert_eq!(recs.len(), 176);
        let back = load_survey(&survey_to_csv(&recs)).unwrap();
        assert_eq!(back.len(), 176);
        let eligible = back.iter().filter(|r| r.is_eligible()).count();
        assert!(eligible >= 64 && eligible <= 150, "{eligible}");
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!((a.id, a.edge, a.slot), (b.id, b.edge, b.slot));
            assert_eq!(a.r_room.is_some(), b.r_room.is_some());
        }
    }

    #[test]
    fn blank_resistance_is_ineligible() {
        let recs = load_survey("id,edge,slot,r_ohm,ic_ua\n0,0,0,,12.5\n1,0,1,3.5e6,12.1\n").unwrap();
        assert_eq!(recs[0].r_room, None);
        assert!(!recs[0].is_eligible());
        assert!(recs[1].is_eligible());
        assert!((recs[1].i_c.unwrap() - 12.1e-6).abs() < 1e-15);
    }

    #[test]
    fn bad_cell_reports_line() {
        let e = load_survey("id,edge,slot,r_ohm,ic_ua\n0,0,0,3e6,12\n1,0,1,3e6,abc\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("ic_ua"));
        let e = load_survey("id,edge,slot\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = load_survey("id,edge,slot,r_ohm,ic_ua\n0,7,0,1,1\n").unwrap_err();
        assert!(e.message.contains("edge"));
    }
}
