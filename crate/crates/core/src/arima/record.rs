//! Plain-text fit records used to checkpoint ARIMA state.
//!
//! ```text
//! arima-fit v1
//! order 1 0 1 1 0 0 7 1
//! ar 0.51
//! ma -0.2
//! sar 0.3
//! sma
//! constant 0.61
//! sigma2 0.004
//! aic -3912.5
//! n_obs 730
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a record parses
//! back to a bit-identical fit.

use std::fmt::Write as _;

use super::{ArimaError, ArimaFit, ArimaOrder, Result};

const HEADER: &str = "arima-fit v1";

impl ArimaFit {
    pub fn to_record(&self) -> String {
        let o = &self.order;
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!(" {x:?}")).collect::<String>();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(
            s,
            "order {} {} {} {} {} {} {} {}",
            o.p,
            o.d,
            o.q,
            o.seasonal_p,
            o.seasonal_d,
            o.seasonal_q,
            o.period,
            u8::from(o.with_constant)
        );
        let _ = writeln!(s, "ar{}", list(&self.ar));
        let _ = writeln!(s, "ma{}", list(&self.ma));
        let _ = writeln!(s, "sar{}", list(&self.seasonal_ar));
        let _ = writeln!(s, "sma{}", list(&self.seasonal_ma));
        let _ = writeln!(s, "constant {:?}", self.constant);
        let _ = writeln!(s, "sigma2 {:?}", self.sigma2);
        let _ = writeln!(s, "aic {:?}", self.aic);
        let _ = writeln!(s, "n_obs {}", self.n_obs);
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let err = |m: &str| ArimaError::Record(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(HEADER) {
            return Err(err("missing `arima-fit v1` header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| err(&format!("missing `{name}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(err(&format!("expected `{name}`, found `{line}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let floats = |v: Vec<String>| -> Result<Vec<f64>> {
            v.iter()
                .map(|s| s.parse::<f64>().map_err(|e| err(&format!("bad number {s:?}: {e}"))))
                .collect()
        };
        let ints: Vec<usize> = field("order")?
            .iter()
            .map(|s| s.parse::<usize>().map_err(|e| err(&format!("bad integer {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if ints.len() != 8 {
            return Err(err("order needs 8 integers"));
        }
        let order = ArimaOrder {
            p: ints[0],
            d: ints[1],
            q: ints[2],
            seasonal_p: ints[3],
            seasonal_d: ints[4],
            seasonal_q: ints[5],
            period: ints[6],
            with_constant: ints[7] == 1,
        };
        order.validate()?;
        let ar = floats(field("ar")?)?;
        let ma = floats(field("ma")?)?;
        let seasonal_ar = floats(field("sar")?)?;
        let seasonal_ma = floats(field("sma")?)?;
        if ar.len() != order.p || ma.len() != order.q || seasonal_ar.len() != order.seasonal_p || seasonal_ma.len() != order.seasonal_q {
            return Err(err("coefficient counts do not match the order"));
        }
        let scalar = |v: Vec<f64>, name: &str| v.first().copied().ok_or_else(|| err(&format!("`{name}` needs a value")));
        let constant = scalar(floats(field("constant")?)?, "constant")?;
        let sigma2 = scalar(floats(field("sigma2")?)?, "sigma2")?;
        let aic = scalar(floats(field("aic")?)?, "aic")?;
        let n_obs = field("n_obs")?
            .first()
            .ok_or_else(|| err("`n_obs` needs a value"))?
            .parse::<usize>()
            .map_err(|e| err(&format!("bad n_obs: {e}")))?;
        Ok(Self {
            order,
            ar,
            ma,
            seasonal_ar,
            seasonal_ma,
            constant,
            sigma2,
            aic,
            n_obs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn record_round_trip_is_bit_exact(
            ar in prop::collection::vec(-0.9f64..0.9, 0..3),
            sma in prop::collection::vec(-0.9f64..0.9, 0..2),
            c in -1e3f64..1e3,
            sigma2 in 1e-9f64..10.0,
            aic in -1e5f64..1e5,
            n in 0usize..10_000,
        ) {
            let fit = ArimaFit {
                order: ArimaOrder::new(ar.len(), 0, 0).seasonal(0, 0, sma.len(), 7).with_constant(true),
                ar,
                ma: vec![],
                seasonal_ar: vec![],
                seasonal_ma: sma,
                constant: c,
                sigma2,
                aic,
                n_obs: n,
            };
            let back = ArimaFit::from_record(&fit.to_record()).unwrap();
            prop_assert_eq!(back.checksum(), fit.checksum());
            prop_assert_eq!(back, fit);
        }
    }

    #[test]
    fn rejects_mismatched_record() {
        assert!(ArimaFit::from_record("nope").is_err());
        let text = "arima-fit v1\norder 1 0 0 0 0 0 0 0\nar\nma\nsar\nsma\nconstant 0.0\nsigma2 1.0\naic 2.0\nn_obs 5\n";
        assert!(ArimaFit::from_record(text).is_err());
    }
}
