//! Injectable time source. Every timestamp the pipeline records comes from a
//! [`Clock`], so runs are reproducible and SLA schedules can be simulated.

use std::sync::Mutex;

use chrono::{DateTime, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;

    /// Block (or, for simulated clocks, jump) until `t`. Never moves backwards.
    fn advance_to(&self, t: DateTime<Utc>);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn advance_to(&self, t: DateTime<Utc>) {
        let now = Utc::now();
        if let Ok(wait) = (t - now).to_std() {
            std::thread::sleep(wait);
        }
    }
}

/// Manually driven clock for tests and simulated streaming runs.
#[derive(Debug)]
pub struct SimClock {
    now: Mutex<DateTime<Utc>>,
}

impl SimClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        SimClock {
            now: Mutex::new(start),
        }
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.now.lock().unwrap() = t;
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut now = self.now.lock().unwrap();
        *now += by;
    }
}

impl Clock for SimClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock().unwrap()
    }

    fn advance_to(&self, t: DateTime<Utc>) {
        let mut now = self.now.lock().unwrap();
        if t > *now {
            *now = t;
        }
    }
}

/// Clock frozen at a single instant; batch runs use it for bit-reproducible logs.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }

    fn advance_to(&self, _t: DateTime<Utc>) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn sim_clock_never_goes_back() {
        let t0 = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let clock = SimClock::new(t0);
        clock.advance_to(t0 + chrono::Duration::hours(2));
        clock.advance_to(t0 + chrono::Duration::hours(1));
        assert_eq!(clock.now(), t0 + chrono::Duration::hours(2));
    }
}
