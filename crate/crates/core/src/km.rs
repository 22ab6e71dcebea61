//! Product-limit (Kaplan-Meier) estimator for right-censored data.

use serde::Serialize;

use crate::error::{Error, Result};

/// Step function Ŝ(t) = Π_{tⱼ ≤ t} (1 − dⱼ/nⱼ), stored at distinct event times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KaplanMeier {
    /// Distinct event times, increasing.
    pub times: Vec<f64>,
    /// Ŝ just after each time in `times`.
    pub surv: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    /// Largest observed time (event or censored).
    pub last_time: f64,
}

impl KaplanMeier {
    pub fn fit(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::Dimension {
                what: "event indicators",
                expected: times.len(),
                got: events.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::InvalidData("Kaplan-Meier needs at least one observation".into()));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));

        let mut km = KaplanMeier {
            times: Vec::new(),
            surv: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
            last_time: times[order[order.len() - 1]],
        };
        let mut s = 1.0;
        let mut at_risk = times.len();
        let mut k = 0;
        while k < order.len() {
            let t = times[order[k]];
            let mut d = 0;
            let mut m = 0;
            while k + m < order.len() && times[order[k + m]] == t {
                d += usize::from(events[order[k + m]]);
                m += 1;
            }
            if d > 0 {
                s *= 1.0 - d as f64 / at_risk as f64;
                km.times.push(t);
                km.surv.push(s);
                km.at_risk.push(at_risk);
                km.events.push(d);
            }
            at_risk -= m;
            k += m;
        }
        Ok(km)
    }

    /// Ŝ(t), right-continuous.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&u| u <= t);
        if idx == 0 {
            1.0
        } else {
            self.surv[idx - 1]
        }
    }

    /// The estimate at the end of follow-up.
    pub fn final_value(&self) -> f64 {
        self.surv.last().copied().unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_product_limit() {
        let km = KaplanMeier::fit(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.eval(2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(3.0), 0.0);
        assert_eq!(km.eval(0.5), 1.0);
    }

    #[test]
    fn single_event_drops_to_zero() {
        let km = KaplanMeier::fit(&[5.0], &[true]).unwrap();
        assert_eq!(km.eval(4.999), 1.0);
        assert_eq!(km.eval(5.0), 0.0);
    }

    #[test]
    fn all_censored_stays_at_one() {
        let km = KaplanMeier::fit(&[1.0, 2.0], &[false, false]).unwrap();
        assert_eq!(km.final_value(), 1.0);
        assert_eq!(km.eval(10.0), 1.0);
    }

    #[test]
    fn ties_are_grouped() {
        let km = KaplanMeier::fit(&[2.0, 2.0, 2.0, 4.0], &[true, true, false, true]).unwrap();
        assert_eq!(km.times, vec![2.0, 4.0]);
        assert!((km.surv[0] - 0.5).abs() < 1e-15);
        assert_eq!(km.surv[1], 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(KaplanMeier::fit(&[], &[]).is_err());
    }
}
