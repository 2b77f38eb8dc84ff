use std::str::FromStr;

/// Inclusive grid `lo:hi:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(format!("expected lo:hi:steps, got `{s}`"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad grid bound `{v}`"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let steps: usize = steps.trim().parse().map_err(|_| format!("bad step count `{steps}`"))?;
        if steps == 0 {
            return Err("grid needs at least one step".into());
        }
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(format!("grid bounds must be finite with lo <= hi, got {lo}:{hi}"));
        }
        if steps == 1 && lo != hi {
            return Err("a one-point grid needs lo == hi".into());
        }
        Ok(Self { lo, hi, steps })
    }
}

impl Grid {
    /// Grid points, both endpoints included. Log spacing needs `lo > 0`.
    pub fn points(&self, log_spaced: bool) -> Result<Vec<f64>, String> {
        if self.steps == 1 {
            return Ok(vec![self.lo]);
        }
        let (lo, hi) = if log_spaced {
            if self.lo <= 0.0 {
                return Err(format!("log grid needs a positive lower bound, got {}", self.lo));
            }
            (self.lo.ln(), self.hi.ln())
        } else {
            (self.lo, self.hi)
        };
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                // pin the endpoints exactly
                let x = if i + 1 == self.steps { hi } else { lo + (hi - lo) * i as f64 / last };
                if log_spaced {
                    if i == 0 {
                        self.lo
                    } else if i + 1 == self.steps {
                        self.hi
                    } else {
                        x.exp()
                    }
                } else {
                    x
                }
            })
            .collect())
    }
}
