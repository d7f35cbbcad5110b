//! Min-ordered event queue with lazy invalidation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Pair(u32, u32),
    Wall(u32),
    /// Neighbor-grid bookkeeping; never logged.
    Cell(u32),
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::Pair(..) => 0,
            EventKind::Wall(_) => 1,
            EventKind::Cell(_) => 2,
        }
    }

    fn indices(self) -> (u32, u32) {
        match self {
            EventKind::Pair(i, j) => (i.min(j), i.max(j)),
            EventKind::Wall(i) | EventKind::Cell(i) => (i, u32::MAX),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CollisionEvent {
    pub time: f64,
    pub kind: EventKind,
    pub stamp_i: u64,
    pub stamp_j: u64,
}

impl CollisionEvent {
    /// Total order: time, then kind (pair < wall < cell), then participant
    /// indices ascending, then stamps.
    fn key_cmp(&self, o: &Self) -> Ordering {
        self.time
            .total_cmp(&o.time)
            .then(self.kind.rank().cmp(&o.kind.rank()))
            .then(self.kind.indices().cmp(&o.kind.indices()))
            .then(self.stamp_i.cmp(&o.stamp_i))
            .then(self.stamp_j.cmp(&o.stamp_j))
    }
}

impl PartialEq for CollisionEvent {
    fn eq(&self, o: &Self) -> bool {
        self.key_cmp(o) == Ordering::Equal
    }
}

impl Eq for CollisionEvent {}

impl PartialOrd for CollisionEvent {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for CollisionEvent {
    // Reversed so that `BinaryHeap` pops the earliest event.
    fn cmp(&self, o: &Self) -> Ordering {
        o.key_cmp(self)
    }
}

#[derive(Debug, Default, Clone)]
pub struct EventQueue {
    heap: BinaryHeap<CollisionEvent>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ev: CollisionEvent) {
        self.heap.push(ev);
    }

    pub fn pop(&mut self) -> Option<CollisionEvent> {
        self.heap.pop()
    }

    pub fn peek(&self) -> Option<&CollisionEvent> {
        self.heap.peek()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(time: f64, kind: EventKind) -> CollisionEvent {
        CollisionEvent { time, kind, stamp_i: 0, stamp_j: 0 }
    }

    #[test]
    fn ties_break_by_kind_then_index() {
        let mut q = EventQueue::new();
        q.push(ev(1.0, EventKind::Wall(0)));
        q.push(ev(1.0, EventKind::Pair(5, 3)));
        q.push(ev(1.0, EventKind::Pair(1, 9)));
        q.push(ev(0.5, EventKind::Cell(7)));
        let order: Vec<EventKind> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(order, vec![EventKind::Cell(7), EventKind::Pair(1, 9), EventKind::Pair(5, 3), EventKind::Wall(0)]);
    }

    proptest! {
        #[test]
        fn pops_are_nondecreasing(times in proptest::collection::vec(0.0f64..100.0, 1..200)) {
            let mut q = EventQueue::new();
            for (k, t) in times.iter().enumerate() {
                q.push(ev(*t, EventKind::Wall(k as u32)));
            }
            let mut last = f64::NEG_INFINITY;
            while let Some(e) = q.pop() {
                prop_assert!(e.time >= last);
                last = e.time;
            }
        }
    }
}
