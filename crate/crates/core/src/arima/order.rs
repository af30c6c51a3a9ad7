use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ArimaError, Result};

/// `(p, d, q)(P, D, Q)_m` with an optional constant (mean for `d + D = 0`,
/// drift for `d + D = 1`). `period == 0` means non-seasonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub period: usize,
    pub with_constant: bool,
}

impl ArimaOrder {
    pub const MAX_P: usize = 5;
    pub const MAX_Q: usize = 5;
    pub const MAX_D: usize = 2;
    pub const MAX_SEASONAL_P: usize = 2;
    pub const MAX_SEASONAL_Q: usize = 2;
    pub const MAX_SEASONAL_D: usize = 1;

    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 0,
            with_constant: false,
        }
    }

    pub fn seasonal(mut self, p: usize, d: usize, q: usize, period: usize) -> Self {
        self.seasonal_p = p;
        self.seasonal_d = d;
        self.seasonal_q = q;
        self.period = period;
        self
    }

    pub fn with_constant(mut self, yes: bool) -> Self {
        self.with_constant = yes;
        self
    }

    pub fn is_seasonal(&self) -> bool {
        self.period > 0
    }

    /// Seasonal differencing lag actually applied (0 when non-seasonal).
    pub(crate) fn seasonal_lag(&self) -> usize {
        if self.is_seasonal() {
            self.period
        } else {
            0
        }
    }

    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Length of the optimiser's parameter vector.
    pub fn n_params(&self) -> usize {
        self.n_coefficients() + usize::from(self.with_constant)
    }

    /// Observations lost to differencing.
    pub fn differencing_loss(&self) -> usize {
        self.d + self.seasonal_d * self.seasonal_lag()
    }

    pub fn min_series_len(&self) -> usize {
        3 * self.n_coefficients() + self.differencing_loss() + 10
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ArimaError::InvalidOrder(m));
        if self.p > Self::MAX_P || self.q > Self::MAX_Q {
            return bad(format!("p={} q={} exceed the cap of 5", self.p, self.q));
        }
        if self.d > Self::MAX_D {
            return bad(format!("d={} exceeds 2", self.d));
        }
        if self.seasonal_p > Self::MAX_SEASONAL_P || self.seasonal_q > Self::MAX_SEASONAL_Q {
            return bad(format!("P={} Q={} exceed the cap of 2", self.seasonal_p, self.seasonal_q));
        }
        if self.seasonal_d > Self::MAX_SEASONAL_D {
            return bad(format!("D={} exceeds 1", self.seasonal_d));
        }
        if self.period == 1 {
            return bad("seasonal period must be 0 (none) or at least 2".into());
        }
        if self.period == 0 && (self.seasonal_p + self.seasonal_d + self.seasonal_q) > 0 {
            return bad("seasonal terms need a period of at least 2".into());
        }
        if self.with_constant && self.d + self.seasonal_d > 1 {
            return bad("a constant is only allowed when d + D <= 1".into());
        }
        Ok(())
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.is_seasonal() {
            write!(f, "({},{},{})[{}]", self.seasonal_p, self.seasonal_d, self.seasonal_q, self.period)?;
        }
        if self.with_constant {
            write!(f, "+c")?;
        }
        Ok(())
    }
}
