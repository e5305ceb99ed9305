//! Measured tables, transcribed digit for digit, and their CSV form.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub x_err: f64,
    pub y: f64,
    pub y_err: f64,
}

impl DataPoint {
    pub const fn new(x: f64, x_err: f64, y: f64, y_err: f64) -> Self {
        Self { x, x_err, y, y_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub points: Vec<DataPoint>,
    pub x_label: String,
    pub y_label: String,
    pub units: String,
}

pub const MIN_POINTS: usize = 3;

pub const DATASET_NAMES: [&str; 6] = [
    "snr_vs_r",
    "snr_vs_ccg",
    "ccg_vs_pump",
    "ccg_vs_a1",
    "ccg_vs_a2",
    "fidelity_vs_snr",
];

/// SNR [dB] against the ratio R: (R, σR, SNR, σSNR).
const SNR_VS_R: [DataPoint; 9] = [
    DataPoint::new(0.013, 0.004, -6.222, 0.740),
    DataPoint::new(0.030, 0.004, -4.440, 0.432),
    DataPoint::new(0.040, 0.006, -3.010, 0.440),
    DataPoint::new(0.080, 0.008, -1.105, 0.388),
    DataPoint::new(0.340, 0.021, -0.530, 0.442),
    DataPoint::new(1.130, 0.052, -0.086, 0.392),
    DataPoint::new(1.510, 0.057, -2.201, 0.241),
    DataPoint::new(3.290, 0.290, -3.502, 0.667),
    DataPoint::new(7.180, 0.680, -6.434, 0.727),
];

/// Pump series, one row per setting:
/// (SNR dB, σ, CC_g per 100 s, σ, pump power mW, σ).
pub const PUMP_SERIES: [[f64; 6]; 5] = [
    [9.91, 1.274, 2.91, 0.111, 13.0, 2.0],
    [7.50, 0.787, 7.23, 0.217, 25.0, 2.0],
    [6.23, 0.714, 19.88, 0.613, 50.0, 2.0],
    [5.17, 0.559, 51.59, 1.384, 104.0, 3.0],
    [3.33, 0.577, 135.28, 4.392, 190.0, 3.0],
];

/// Idler attenuation: (A1, CC_g per 100 s, σ).
const IDLER_ATTENUATION: [[f64; 3]; 5] = [
    [1.0, 41.2, 3.2],
    [1.4, 27.2, 1.7],
    [2.0, 19.0, 1.7],
    [2.7, 14.3, 1.8],
    [4.0, 10.0, 1.7],
];

/// Signal attenuation: (A2, CC_g per 100 s, σ).
const SIGNAL_ATTENUATION: [[f64; 3]; 5] = [
    [1.0, 44.8, 2.5],
    [1.3, 22.2, 1.5],
    [1.9, 10.0, 1.0],
    [2.8, 6.2, 1.0],
    [3.8, 2.3, 0.3],
];

/// Computed fidelity per pump setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub fidelity: f64,
    pub low: f64,
    pub high: f64,
    pub snr_db: f64,
    pub snr_db_err: f64,
}

/// Fidelities with their uncertainty intervals. The last SNR (3.29 dB)
/// differs from the pump series' 3.33 dB for the same setting; both are kept.
pub const FIDELITY_TABLE: [FidelityRow; 5] = [
    FidelityRow {
        fidelity: 0.96,
        low: 0.93,
        high: 0.98,
        snr_db: 9.91,
        snr_db_err: 1.27,
    },
    FidelityRow {
        fidelity: 0.94,
        low: 0.90,
        high: 0.96,
        snr_db: 7.50,
        snr_db_err: 0.79,
    },
    FidelityRow {
        fidelity: 0.92,
        low: 0.86,
        high: 0.95,
        snr_db: 6.23,
        snr_db_err: 0.71,
    },
    FidelityRow {
        fidelity: 0.89,
        low: 0.85,
        high: 0.91,
        snr_db: 5.17,
        snr_db_err: 0.56,
    },
    FidelityRow {
        fidelity: 0.85,
        low: 0.83,
        high: 0.86,
        snr_db: 3.29,
        snr_db_err: 0.58,
    },
];

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        points: Vec<DataPoint>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
        units: impl Into<String>,
    ) -> Result<Self> {
        let d = Self {
            name: name.into(),
            points,
            x_label: x_label.into(),
            y_label: y_label.into(),
            units: units.into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < MIN_POINTS {
            return Err(invalid(format!(
                "dataset {} has {} points, need {MIN_POINTS}",
                self.name,
                self.points.len()
            )));
        }
        if let Some(p) = self
            .points
            .iter()
            .find(|p| !(p.x_err >= 0.0 && p.y_err >= 0.0))
        {
            return Err(invalid(format!("negative error bar in {p:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    pub fn y_errs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y_err).collect()
    }

    /// CSV with `#` metadata lines and a `x,x_err,y,y_err` header.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# dataset: {}\n# x: {}\n# y: {}\n# units: {}\n",
            self.name, self.x_label, self.y_label, self.units
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            w.serialize(p)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
        Ok(out)
    }

    /// Reads a CSV with at least the `x,x_err,y,y_err` columns; other columns
    /// and `#` lines are ignored apart from the metadata keys written by
    /// [`Dataset::to_csv`]. `fallback_name` is used when no `# dataset:` line
    /// is present.
    pub fn from_csv(mut reader: impl Read, fallback_name: &str) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut name = fallback_name.to_string();
        let (mut x_label, mut y_label, mut units) = (String::new(), String::new(), String::new());
        for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
            if let Some((key, value)) = line.split_once(':') {
                let value = value.trim().to_string();
                match key.trim() {
                    "dataset" => name = value,
                    "x" => x_label = value,
                    "y" => y_label = value,
                    "units" => units = value,
                    _ => {}
                }
            }
        }
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let points = r
            .deserialize()
            .collect::<std::result::Result<Vec<DataPoint>, _>>()?;
        Self::new(name, points, x_label, y_label, units)
    }
}

/// Returns one of the embedded measurement tables.
pub fn load_dataset(name: &str) -> Result<Dataset> {
    let d = match name {
        "snr_vs_r" => Dataset::new(
            name,
            SNR_VS_R.to_vec(),
            "R",
            "SNR",
            "R: dimensionless; SNR: dB",
        )?,
        "snr_vs_ccg" => Dataset::new(
            name,
            PUMP_SERIES
                .iter()
                .map(|r| DataPoint::new(r[2], r[3], r[0], r[1]))
                .collect(),
            "CC_g",
            "SNR",
            "CC_g: counts per 100 s; SNR: dB",
        )?,
        "ccg_vs_pump" => Dataset::new(
            name,
            PUMP_SERIES
                .iter()
                .map(|r| DataPoint::new(r[4], r[5], r[2], r[3]))
                .collect(),
            "P_p",
            "CC_g",
            "P_p: mW; CC_g: counts per 100 s",
        )?,
        "ccg_vs_a1" => attenuation(name, "A1", &IDLER_ATTENUATION)?,
        "ccg_vs_a2" => attenuation(name, "A2", &SIGNAL_ATTENUATION)?,
        "fidelity_vs_snr" => Dataset::new(
            name,
            FIDELITY_TABLE
                .iter()
                .map(|r| DataPoint::new(r.snr_db, r.snr_db_err, r.fidelity, (r.high - r.low) / 2.0))
                .collect(),
            "SNR",
            "F",
            "SNR: dB; F: dimensionless (y_err is the interval half-width)",
        )?,
        other => {
            return Err(Error::NotFound(format!(
                "dataset '{other}' (known: {})",
                DATASET_NAMES.join(", ")
            )))
        }
    };
    Ok(d)
}

fn attenuation(name: &str, label: &str, rows: &[[f64; 3]]) -> Result<Dataset> {
    Dataset::new(
        name,
        rows.iter()
            .map(|r| DataPoint::new(r[0], 0.0, r[1], r[2]))
            .collect(),
        label,
        "CC_g",
        format!("{label}: dimensionless; CC_g: counts per 100 s"),
    )
}
