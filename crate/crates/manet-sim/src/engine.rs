//! Time-ordered event queue with cancellable entries.
//!
//! The queue is the core of the simulator: events are dispatched strictly in
//! `(fire_at, seq)` order, where `seq` is a monotonically increasing
//! insertion counter. The tie-break makes equal-time dispatch independent of
//! any container internals, which is what keeps runs replayable.

use std::collections::BTreeMap;

use crate::time::SimTime;

/// Opaque ticket for a scheduled event. Valid until the event fires or is
/// cancelled; cancelling twice (or after the fire) reports `false`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle {
    key: (SimTime, u64),
}

/// Event queue over an arbitrary payload type.
///
/// Backed by an ordered map so cancellation removes the entry outright —
/// cancelled events never dispatch and never linger.
#[derive(Debug)]
pub struct EventQueue<E> {
    queue: BTreeMap<(SimTime, u64), E>,
    next_seq: u64,
    now: SimTime,
    dispatched: u64,
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            queue: BTreeMap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            dispatched: 0,
        }
    }

    /// Current simulation time: the timestamp of the last popped event.
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Enqueues an event. Scheduling into the past is a programming error
    /// and aborts the run.
    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: {:?} < {:?}",
            fire_at,
            self.now
        );
        let key = (fire_at, self.next_seq);
        self.next_seq += 1;
        self.queue.insert(key, event);
        EventHandle { key }
    }

    /// Suppresses a pending event. Returns `true` if it was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.queue.remove(&handle.key).is_some()
    }

    /// Pops the next event in `(fire_at, seq)` order and advances the clock.
    pub fn pop(&mut self) -> Option<(SimTime, u64, E)> {
        let ((fire_at, seq), event) = self.queue.pop_first()?;
        self.now = fire_at;
        self.dispatched += 1;
        Some((fire_at, seq, event))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.first_key_value().map(|(&(t, _), _)| t)
    }
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn schedule_at_now_runs_before_later_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(5), "late");
        q.schedule(SimTime::ZERO, "now");
        assert_eq!(q.pop().unwrap().2, "now");
        assert_eq!(q.pop().unwrap().2, "late");
    }

    #[test]
    fn equal_times_dispatch_in_insertion_order() {
        let mut q = EventQueue::new();
        let t = SimTime::from_micros(7);
        for i in 0..5 {
            q.schedule(t, i);
        }
        let order: Vec<i32> = std::iter::from_fn(|| q.pop()).map(|(_, _, e)| e).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn cancel_is_single_shot() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime::from_micros(3), ());
        assert!(q.cancel(h));
        assert!(!q.cancel(h));
        assert!(q.pop().is_none());
    }

    #[test]
    fn cancelled_events_never_dispatch() {
        let mut q = EventQueue::new();
        let keep = SimTime::from_micros(1);
        q.schedule(keep, "keep");
        let h = q.schedule(SimTime::from_micros(2), "drop");
        q.cancel(h);
        assert_eq!(q.pop().unwrap().2, "keep");
        assert!(q.pop().is_none());
    }

    #[test]
    fn random_schedule_matches_sort_oracle() {
        // Independent oracle: sort the scheduled list by (fire_at, seq) and
        // compare against the queue's dispatch order.
        let mut rng = ChaCha12Rng::seed_from_u64(0xfeed);
        let mut q = EventQueue::new();
        let mut oracle: Vec<(SimTime, u64, u32)> = Vec::new();
        for i in 0..10_000u32 {
            let t = SimTime::from_micros(rng.gen_range(0..5_000));
            let h = q.schedule(t, i);
            let _ = h;
            oracle.push((t, (i as u64), i));
        }
        oracle.sort_by_key(|&(t, s, _)| (t, s));
        let dispatched: Vec<(SimTime, u64, u32)> =
            std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(dispatched, oracle);
    }

    #[test]
    fn cancel_odd_leaves_even_set() {
        // Bookkeeping oracle: dispatched set equals the even-indexed set.
        let mut q = EventQueue::new();
        let mut handles = Vec::new();
        for i in 0..100u32 {
            handles.push(q.schedule(SimTime::from_micros((i * 13 % 31) as u64), i));
        }
        for (i, h) in handles.iter().enumerate() {
            if i % 2 == 1 {
                assert!(q.cancel(*h));
            }
        }
        let mut got: Vec<u32> = std::iter::from_fn(|| q.pop()).map(|(_, _, e)| e).collect();
        got.sort_unstable();
        let expect: Vec<u32> = (0..100).filter(|i| i % 2 == 0).collect();
        assert_eq!(got, expect);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_aborts() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(10), ());
        q.pop();
        q.schedule(SimTime::from_micros(5), ());
    }

    #[test]
    fn clock_is_nondecreasing() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut q = EventQueue::new();
        for i in 0..1000u32 {
            q.schedule(SimTime::from_micros(rng.gen_range(0..500)), i);
        }
        let mut last = SimTime::ZERO;
        while let Some((t, _, _)) = q.pop() {
            assert!(t >= last);
            last = t;
        }
    }
}
