use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::BalanceError;

/// Linear per-block runtime model in microseconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    /// Microseconds per cell.
    pub slope: f64,
    /// Microseconds per block.
    pub intercept: f64,
    pub r_squared: f64,
}

impl CostModel {
    /// Coefficients measured for the momentum kernel on the reference GPU.
    pub const fn reference() -> Self {
        Self {
            slope: 1.09e-4,
            intercept: 46.2,
            r_squared: 0.942,
        }
    }

    #[inline]
    pub fn block_cost(&self, cells: usize) -> f64 {
        self.slope * cells as f64 + self.intercept
    }

    /// `slope`, `intercept` and `r_squared` lines, `#` comments allowed.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# per-block cost in microseconds: slope * cells + intercept\n");
        writeln!(s, "slope {:e}", self.slope).unwrap();
        writeln!(s, "intercept {:e}", self.intercept).unwrap();
        writeln!(s, "r_squared {:e}", self.r_squared).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self, BalanceError> {
        let (mut slope, mut intercept, mut r2) = (None, None, None);
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| BalanceError::Parse(format!("model line {line:?}")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| BalanceError::Parse(format!("model value {value:?}")))?;
            match key {
                "slope" => slope = Some(v),
                "intercept" => intercept = Some(v),
                "r_squared" => r2 = Some(v),
                other => return Err(BalanceError::Parse(format!("unknown model key {other:?}"))),
            }
        }
        match (slope, intercept) {
            (Some(slope), Some(intercept)) => Ok(Self {
                slope,
                intercept,
                r_squared: r2.unwrap_or(f64::NAN),
            }),
            _ => Err(BalanceError::Parse("model needs slope and intercept".into())),
        }
    }

    pub fn read(path: &Path) -> Result<Self, BalanceError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), BalanceError> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

/// `cells,microseconds` rows; a non-numeric first row is a header and
/// `#` starts a comment.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>, BalanceError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [x, y] => x.parse::<f64>().ok().zip(y.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => out.push(p),
            None if out.is_empty() && k == 0 => {}
            None => return Err(BalanceError::Parse(format!("sample line {}: {line:?}", k + 1))),
        }
    }
    Ok(out)
}

/// Samples as written by [`parse_samples`]'s inverse.
pub fn samples_to_csv(samples: &[(f64, f64)]) -> String {
    let mut s = String::from("cells,microseconds\n");
    for (x, y) in samples {
        writeln!(s, "{x},{y}").unwrap();
    }
    s
}

/// Ordinary least squares on `(cells, microseconds)` samples.
///
/// Negative coefficients are clamped to zero with a warning; `r_squared`
/// then describes the clamped line, floored at zero.
pub fn fit_cost_model(samples: &[(f64, f64)]) -> Result<CostModel, BalanceError> {
    if samples.len() < 2 {
        return Err(BalanceError::DegenerateFit(format!("{} samples", samples.len())));
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in samples {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(BalanceError::DegenerateFit(
            "all samples have the same cell count".into(),
        ));
    }
    let mut slope = sxy / sxx;
    let mut intercept = mean_y - slope * mean_x;
    if slope < 0.0 {
        warn!("fitted slope {slope} is negative, clamping to 0");
        slope = 0.0;
        intercept = mean_y;
    }
    if intercept < 0.0 {
        warn!("fitted intercept {intercept} is negative, clamping to 0");
        intercept = 0.0;
    }
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in samples {
        let r = y - (slope * x + intercept);
        ss_res += r * r;
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(CostModel {
        slope,
        intercept,
        r_squared,
    })
}
