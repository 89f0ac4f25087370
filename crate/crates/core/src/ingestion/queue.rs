//! In-process bounded FIFO queue with optional file spill.
//!
//! Without a spill file, `push` blocks while `capacity` items are buffered.
//! With one, overflow is appended to the file as JSON lines and read back in
//! order once the in-memory buffer drains, so producers never block and FIFO
//! order holds across the spill boundary.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum QueueError {
    #[error("queue is closed")]
    Closed,
    #[error("queue is full")]
    Full,
    #[error("queue spill file {path}: {message}")]
    Spill { path: String, message: String },
}

struct Spill {
    path: PathBuf,
    writer: File,
    read_offset: u64,
    pending: usize,
}

struct State<T> {
    buffer: VecDeque<T>,
    spill: Option<Spill>,
    in_flight: usize,
    closed: bool,
    pushed: u64,
}

pub struct BoundedQueue<T> {
    capacity: usize,
    state: Mutex<State<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    idle: Condvar,
    _marker: PhantomData<T>,
}

impl<T: Serialize + DeserializeOwned> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        BoundedQueue {
            capacity,
            state: Mutex::new(State {
                buffer: VecDeque::with_capacity(capacity),
                spill: None,
                in_flight: 0,
                closed: false,
                pushed: 0,
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            idle: Condvar::new(),
            _marker: PhantomData,
        }
    }

    /// A queue that spills overflow to `path` (truncated on open).
    pub fn with_spill(capacity: usize, path: &Path) -> Result<Self, QueueError> {
        let q = Self::new(capacity);
        let writer = OpenOptions::new()
            .create(true)
            .truncate(true)
            .read(true)
            .write(true)
            .open(path)
            .map_err(|e| QueueError::Spill {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        q.state.lock().unwrap().spill = Some(Spill {
            path: path.to_path_buf(),
            writer,
            read_offset: 0,
            pending: 0,
        });
        Ok(q)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn spill_err(spill: &Spill, e: impl std::fmt::Display) -> QueueError {
        QueueError::Spill {
            path: spill.path.display().to_string(),
            message: e.to_string(),
        }
    }

    fn enqueue(&self, st: &mut State<T>, item: T) -> Result<(), QueueError> {
        let spilling = st.spill.as_ref().is_some_and(|s| s.pending > 0);
        if st.buffer.len() < self.capacity && !spilling {
            st.buffer.push_back(item);
        } else {
            let spill = st.spill.as_mut().expect("caller checked capacity");
            let mut line = serde_json::to_string(&item).map_err(|e| Self::spill_err(spill, e))?;
            line.push('\n');
            spill
                .writer
                .seek(SeekFrom::End(0))
                .and_then(|_| spill.writer.write_all(line.as_bytes()))
                .map_err(|e| Self::spill_err(spill, e))?;
            spill.pending += 1;
        }
        st.pushed += 1;
        self.not_empty.notify_one();
        Ok(())
    }

    /// Blocks while the queue is full and has no spill file.
    pub fn push(&self, item: T) -> Result<(), QueueError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if st.closed {
                return Err(QueueError::Closed);
            }
            if st.buffer.len() < self.capacity || st.spill.is_some() {
                return self.enqueue(&mut st, item);
            }
            st = self.not_full.wait(st).unwrap();
        }
    }

    pub fn try_push(&self, item: T) -> Result<(), QueueError> {
        let mut st = self.state.lock().unwrap();
        if st.closed {
            return Err(QueueError::Closed);
        }
        if st.buffer.len() >= self.capacity && st.spill.is_none() {
            return Err(QueueError::Full);
        }
        self.enqueue(&mut st, item)
    }

    fn refill(&self, st: &mut State<T>) -> Result<(), QueueError> {
        let Some(spill) = st.spill.as_mut() else {
            return Ok(());
        };
        if spill.pending == 0 {
            return Ok(());
        }
        let mut reader = File::open(&spill.path).map_err(|e| Self::spill_err(spill, e))?;
        reader
            .seek(SeekFrom::Start(spill.read_offset))
            .map_err(|e| Self::spill_err(spill, e))?;
        let mut reader = BufReader::new(reader);
        let mut line = String::new();
        while st.buffer.len() < self.capacity && spill.pending > 0 {
            line.clear();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Self::spill_err(spill, e))?;
            if n == 0 {
                return Err(Self::spill_err(spill, "spill file shorter than expected"));
            }
            let item: T = serde_json::from_str(&line).map_err(|e| Self::spill_err(spill, e))?;
            spill.read_offset += n as u64;
            spill.pending -= 1;
            st.buffer.push_back(item);
        }
        if spill.pending == 0 {
            spill.writer.set_len(0).map_err(|e| Self::spill_err(spill, e))?;
            spill.read_offset = 0;
        }
        Ok(())
    }

    /// Blocks until an item is available; `None` once closed and drained.
    /// Every returned item must be [`ack`](Self::ack)ed.
    pub fn pop(&self) -> Result<Option<T>, QueueError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if st.buffer.is_empty() {
                self.refill(&mut st)?;
            }
            if let Some(item) = st.buffer.pop_front() {
                st.in_flight += 1;
                self.not_full.notify_one();
                return Ok(Some(item));
            }
            if st.closed {
                return Ok(None);
            }
            st = self.not_empty.wait(st).unwrap();
        }
    }

    pub fn ack(&self) {
        let mut st = self.state.lock().unwrap();
        st.in_flight = st.in_flight.saturating_sub(1);
        if st.in_flight == 0 && st.buffer.is_empty() && st.spill.as_ref().is_none_or(|s| s.pending == 0) {
            self.idle.notify_all();
        }
    }

    /// Blocks until every pushed item has been popped and acknowledged.
    pub fn wait_idle(&self) {
        let mut st = self.state.lock().unwrap();
        while st.in_flight > 0 || !st.buffer.is_empty() || st.spill.as_ref().is_some_and(|s| s.pending > 0) {
            st = self.idle.wait(st).unwrap();
        }
    }

    /// Refuses further pushes; consumers drain what is left.
    pub fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    /// Items buffered in memory or spilled, excluding in-flight ones.
    pub fn len(&self) -> usize {
        let st = self.state.lock().unwrap();
        st.buffer.len() + st.spill.as_ref().map_or(0, |s| s.pending)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pushed(&self) -> u64 {
        self.state.lock().unwrap().pushed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::time::Duration;

    #[test]
    fn full_queue_without_spill_refuses_try_push() {
        let q = BoundedQueue::new(2);
        q.try_push(1u32).unwrap();
        q.try_push(2).unwrap();
        assert!(matches!(q.try_push(3), Err(QueueError::Full)));
        assert_eq!(q.pop().unwrap(), Some(1));
        q.ack();
        q.try_push(3).unwrap();
    }

    #[test]
    fn push_blocks_until_consumer_makes_room() {
        let q = Arc::new(BoundedQueue::new(1));
        q.push(0u32).unwrap();
        let producer = {
            let q = Arc::clone(&q);
            std::thread::spawn(move || {
                for i in 1..50 {
                    q.push(i).unwrap();
                }
                q.close();
            })
        };
        let mut got = Vec::new();
        while let Some(x) = q.pop().unwrap() {
            assert!(q.len() <= 1);
            got.push(x);
            q.ack();
        }
        producer.join().unwrap();
        assert_eq!(got, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn spill_preserves_fifo() {
        let dir = tempfile::tempdir().unwrap();
        let q = BoundedQueue::with_spill(3, &dir.path().join("spill.jsonl")).unwrap();
        for i in 0..10u32 {
            q.push(i).unwrap();
        }
        assert_eq!(q.len(), 10);
        let mut got = Vec::new();
        for _ in 0..4 {
            got.push(q.pop().unwrap().unwrap());
            q.ack();
        }
        for i in 10..14u32 {
            q.push(i).unwrap();
        }
        q.close();
        while let Some(x) = q.pop().unwrap() {
            got.push(x);
            q.ack();
        }
        assert_eq!(got, (0..14).collect::<Vec<_>>());
    }

    #[test]
    fn closed_queue_drains_then_ends() {
        let q = BoundedQueue::new(4);
        q.push("a".to_string()).unwrap();
        q.close();
        assert!(matches!(q.push("b".to_string()), Err(QueueError::Closed)));
        assert_eq!(q.pop().unwrap().as_deref(), Some("a"));
        q.ack();
        assert_eq!(q.pop().unwrap(), None);
    }

    #[test]
    fn wait_idle_returns_after_acks() {
        let q = Arc::new(BoundedQueue::new(8));
        for i in 0..5u32 {
            q.push(i).unwrap();
        }
        let consumer = {
            let q = Arc::clone(&q);
            std::thread::spawn(move || {
                for _ in 0..5 {
                    q.pop().unwrap();
                    std::thread::sleep(Duration::from_millis(2));
                    q.ack();
                }
            })
        };
        q.wait_idle();
        assert!(q.is_empty());
        consumer.join().unwrap();
    }

    #[test]
    fn many_producers_one_consumer() {
        let q = Arc::new(BoundedQueue::new(4));
        let producers: Vec<_> = (0..4u32)
            .map(|p| {
                let q = Arc::clone(&q);
                std::thread::spawn(move || {
                    for i in 0..100 {
                        q.push((p, i)).unwrap();
                    }
                })
            })
            .collect();
        let consumer = {
            let q = Arc::clone(&q);
            std::thread::spawn(move || {
                let mut got = Vec::new();
                while let Some(x) = q.pop().unwrap() {
                    got.push(x);
                    q.ack();
                }
                got
            })
        };
        for p in producers {
            p.join().unwrap();
        }
        q.close();
        let got = consumer.join().unwrap();
        assert_eq!(got.len(), 400);
        for p in 0..4u32 {
            let mine: Vec<_> = got.iter().filter(|(q, _)| *q == p).map(|(_, i)| *i).collect();
            assert_eq!(mine, (0..100).collect::<Vec<_>>());
        }
    }
}
