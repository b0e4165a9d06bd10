use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};

use crate::clock::Clock;

/// Token bucket of capacity one: successive requests are spaced at least
/// `1 / rate` apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: chrono::Duration,
    next_slot: Mutex<Option<DateTime<Utc>>>,
}

impl RateLimiter {
    /// `rate` is in requests per second and must be positive.
    pub fn new(rate: f64) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate must be positive");
        let interval = Duration::from_secs_f64(1.0 / rate);
        Self {
            interval: chrono::Duration::from_std(interval).expect("interval fits"),
            next_slot: Mutex::new(None),
        }
    }

    /// Reserves the next slot and sleeps until it arrives. Returns the slot.
    pub fn acquire(&self, clock: &dyn Clock) -> DateTime<Utc> {
        let (slot, wait) = {
            let mut next = self.next_slot.lock().expect("limiter poisoned");
            let now = clock.now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            (slot, slot - now)
        };
        if let Ok(wait) = wait.to_std() {
            if !wait.is_zero() {
                clock.sleep(wait);
            }
        }
        slot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use chrono::TimeZone;
    use std::sync::Arc;

    #[test]
    fn slots_are_spaced_by_interval() {
        let clock = ManualClock::new(Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap());
        let limiter = RateLimiter::new(4.0);
        let slots: Vec<_> = (0..10).map(|_| limiter.acquire(&clock)).collect();
        for w in slots.windows(2) {
            assert!(w[1] - w[0] >= chrono::Duration::milliseconds(250));
        }
        assert_eq!(clock.now() - slots[0], chrono::Duration::milliseconds(2250));
    }

    #[test]
    fn concurrent_reservations_never_collide() {
        let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()));
        let limiter = Arc::new(RateLimiter::new(2.0));
        let mut slots: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|_| {
                    let (clock, limiter) = (clock.clone(), limiter.clone());
                    s.spawn(move || (0..25).map(|_| limiter.acquire(clock.as_ref())).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        slots.sort();
        for w in slots.windows(2) {
            assert!(w[1] - w[0] >= chrono::Duration::milliseconds(500));
        }
    }
}
