use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};

use super::{Clock, Ctx, Servers, Telemetry, WorkerKind};
use crate::error::{Error, Result};
use crate::SimRng;

/// Outcome of starting one worker operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Begin {
    /// The operation takes this many seconds; `finish` runs at its end.
    Work(f64),
    /// Nothing to do yet; retry after a back-off.
    Idle,
    Done,
}

/// A pull/step/push loop split at its push: `begin` pulls and computes,
/// `finish` publishes.
pub trait Worker: Send {
    fn kind(&self) -> WorkerKind;
    /// Duration of one operation under the cost model.
    fn nominal_duration(&self) -> f64;
    fn begin(&mut self, ctx: &Ctx) -> Result<Begin>;
    fn finish(&mut self, ctx: &Ctx) -> Result<()>;
}

/// Fraction of a worker's op duration it waits before retrying when idle.
pub const IDLE_BACKOFF: f64 = 0.1;

struct Event {
    time: f64,
    kind: WorkerKind,
    tiebreak: u64,
    worker: usize,
    in_flight: bool,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the maximum
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.tiebreak.cmp(&self.tiebreak))
    }
}

/// Discrete-event simulation of the workers on one thread. Each worker has
/// one pending event; at it the worker finishes its in-flight operation (if
/// any) and begins the next. Simultaneous events run in data, model, policy
/// order, then in seeded random order. Returns the final virtual time.
pub fn virtual_scheduler(workers: &mut [&mut dyn Worker], servers: &Servers, telemetry: &Telemetry, seed: u64) -> Result<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut heap = BinaryHeap::new();
    for (i, w) in workers.iter().enumerate() {
        heap.push(Event {
            time: 0.0,
            kind: w.kind(),
            tiebreak: rng.random(),
            worker: i,
            in_flight: false,
        });
    }
    let mut now = 0.0;
    while let Some(ev) = heap.pop() {
        now = ev.time;
        let ctx = Ctx {
            servers,
            telemetry,
            clock: Clock::Virtual(now),
        };
        let w = &mut *workers[ev.worker];
        if ev.in_flight {
            w.finish(&ctx)?;
        }
        let (delay, in_flight) = match w.begin(&ctx)? {
            Begin::Work(d) => {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Precondition(format!(
                        "{} worker reported a non-positive duration {d}",
                        w.kind().name()
                    )));
                }
                telemetry.busy(w.kind(), d);
                (d, true)
            }
            Begin::Idle => {
                let d = IDLE_BACKOFF * w.nominal_duration();
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Precondition(format!("{} worker has a zero-duration idle cycle", w.kind().name())));
                }
                (d, false)
            }
            Begin::Done => continue,
        };
        heap.push(Event {
            time: now + delay,
            kind: ev.kind,
            tiebreak: rng.random(),
            worker: ev.worker,
            in_flight,
        });
    }
    Ok(now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workers::testing::{servers, tiny_config};
    use crate::workers::{RunMode, TraceEvent};

    /// Works for `duration` per op until `until`, recording finish times.
    struct Stub {
        kind: WorkerKind,
        duration: f64,
        until: f64,
        idle_until: f64,
        id: u64,
        finishes: Vec<f64>,
    }

    impl Stub {
        fn new(kind: WorkerKind, duration: f64, until: f64) -> Self {
            Stub { kind, duration, until, idle_until: 0.0, id: 0, finishes: Vec::new() }
        }
    }

    impl Worker for Stub {
        fn kind(&self) -> WorkerKind {
            self.kind
        }
        fn nominal_duration(&self) -> f64 {
            self.duration
        }
        fn begin(&mut self, ctx: &Ctx) -> Result<Begin> {
            let now = ctx.clock.now();
            ctx.telemetry.event(now, self.kind, "begin", self.id);
            if now >= self.until {
                Ok(Begin::Done)
            } else if now < self.idle_until {
                Ok(Begin::Idle)
            } else {
                Ok(Begin::Work(self.duration))
            }
        }
        fn finish(&mut self, ctx: &Ctx) -> Result<()> {
            self.finishes.push(ctx.clock.now());
            Ok(())
        }
    }

    fn run_stubs(stubs: &mut [Stub], seed: u64) -> (f64, Vec<TraceEvent>) {
        let servers = servers(&tiny_config(RunMode::AsyncVirtual, 1));
        let telemetry = Telemetry::new();
        let mut refs: Vec<&mut dyn Worker> = stubs.iter_mut().map(|s| s as &mut dyn Worker).collect();
        let end = virtual_scheduler(&mut refs, &servers, &telemetry, seed).unwrap();
        (end, telemetry.into_metrics().events)
    }

    #[test]
    fn first_twenty_seconds() {
        let mut stubs = [
            Stub::new(WorkerKind::Data, 10.0, 20.0),
            Stub::new(WorkerKind::Model, 0.5, 20.0),
            Stub::new(WorkerKind::Policy, 0.125, 20.0),
        ];
        let (end, events) = run_stubs(&mut stubs, 1);
        assert_eq!(end, 20.0);
        assert_eq!(stubs[0].finishes, vec![10.0, 20.0]);
        assert_eq!(stubs[1].finishes.len(), 40);
        assert_eq!(stubs[2].finishes.len(), 160);
        assert_eq!(stubs[1].finishes[..3], [0.5, 1.0, 1.5]);
        // Time never goes backwards; simultaneous events run data, model, policy.
        for w in events.windows(2) {
            assert!(w[0].time <= w[1].time);
            if w[0].time == w[1].time {
                assert!(w[0].worker <= w[1].worker, "{:?} then {:?}", w[0], w[1]);
            }
        }
        let at_zero: Vec<WorkerKind> = events.iter().take_while(|e| e.time == 0.0).map(|e| e.worker).collect();
        assert_eq!(at_zero, vec![WorkerKind::Data, WorkerKind::Model, WorkerKind::Policy]);
    }

    #[test]
    fn idle_workers_back_off() {
        let mut model = Stub::new(WorkerKind::Model, 0.5, 2.0);
        model.idle_until = 1.0;
        let mut stubs = [model];
        let (_, events) = run_stubs(&mut stubs, 0);
        let begins: Vec<f64> = events.iter().map(|e| e.time).collect();
        // Idle retries every 0.05 s until t = 1, then works in 0.5 s steps.
        assert_eq!(begins.iter().filter(|&&t| t < 1.0 - 1e-9).count(), 20);
        assert_eq!(stubs[0].finishes.len(), 2);
        assert!((stubs[0].finishes[1] - stubs[0].finishes[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_kinds_are_ordered_by_seed() {
        let first = |seed| {
            let a = Stub::new(WorkerKind::Policy, 1.0, 1.0);
            let mut b = Stub::new(WorkerKind::Policy, 1.0, 1.0);
            b.id = 1;
            let mut stubs = [a, b];
            let (_, events) = run_stubs(&mut stubs, seed);
            events[0].version
        };
        let firsts: Vec<u64> = (0..16).map(first).collect();
        assert_eq!(firsts, (0..16).map(first).collect::<Vec<_>>());
        assert!(firsts.contains(&0) && firsts.contains(&1));
    }

    #[test]
    fn non_positive_durations_are_rejected() {
        let mut stubs = [Stub::new(WorkerKind::Data, 0.0, 1.0)];
        let servers = servers(&tiny_config(RunMode::AsyncVirtual, 1));
        let telemetry = Telemetry::new();
        let mut refs: Vec<&mut dyn Worker> = stubs.iter_mut().map(|s| s as &mut dyn Worker).collect();
        assert!(matches!(virtual_scheduler(&mut refs, &servers, &telemetry, 0), Err(Error::Precondition(_))));
    }
}
