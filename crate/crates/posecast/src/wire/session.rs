//! Session layer over a reliable ordered byte stream (TCP): a sender with
//! strictly increasing sequence numbers, and a receiver that resynchronizes
//! past corruption, drops stale or duplicate sequence numbers, clamps the
//! angles into the joint limits and hands frames out in order.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use crate::pose3d::{clamp_to_limits, ClampedSlots, JointAngleFrame, JointLimits};

use super::{encode, Deframer, WireError, MESSAGE_SIZE};

/// Sender half: connects to a receiver and streams frames with
/// monotonically increasing sequence numbers and session-relative
/// millisecond timestamps.
pub struct PoseSender {
    stream: TcpStream,
    next_seq: u32,
    epoch: Instant,
}

impl PoseSender {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, WireError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            next_seq: 0,
            epoch: Instant::now(),
        })
    }

    /// Send one frame; returns the sequence number it went out with.
    pub fn send(&mut self, frame: &JointAngleFrame<f64>) -> Result<u32, WireError> {
        let ts = self.epoch.elapsed().as_millis().min(u32::MAX as u128) as u32;
        self.send_stamped(frame, ts)
    }

    /// Send with an explicit timestamp (frame index based pacing).
    pub fn send_stamped(
        &mut self,
        frame: &JointAngleFrame<f64>,
        timestamp_ms: u32,
    ) -> Result<u32, WireError> {
        let seq = self.next_seq;
        let msg = encode(frame, seq, timestamp_ms)?;
        self.stream.write_all(&msg)?;
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(seq)
    }

    pub fn frames_sent(&self) -> u32 {
        self.next_seq
    }
}

/// Live counters of one receiving session. Snapshots are cheap and safe to
/// take from any thread while the session runs.
#[derive(Debug, Default)]
pub struct SessionStats {
    frames: AtomicU64,
    bytes: AtomicU64,
    corrupt_events: AtomicU64,
    skipped_bytes: AtomicU64,
    duplicates: AtomicU64,
    window: Mutex<Option<(Instant, Instant)>>,
}

/// Point-in-time view of the session counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsSnapshot {
    pub frames: u64,
    pub bytes: u64,
    pub corrupt_events: u64,
    pub skipped_bytes: u64,
    pub duplicates_dropped: u64,
    pub elapsed_secs: f64,
    pub effective_fps: f64,
    pub bandwidth_bytes_per_sec: f64,
}

impl SessionStats {
    fn on_bytes(&self, n: usize) {
        self.bytes.fetch_add(n as u64, Ordering::Relaxed);
        let now = Instant::now();
        let mut w = self.window.lock().unwrap_or_else(|e| e.into_inner());
        match &mut *w {
            Some((_, last)) => *last = now,
            None => *w = Some((now, now)),
        }
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let frames = self.frames.load(Ordering::Relaxed);
        let bytes = self.bytes.load(Ordering::Relaxed);
        let window = *self.window.lock().unwrap_or_else(|e| e.into_inner());
        let elapsed = window
            .map(|(first, last)| (last - first).as_secs_f64())
            .unwrap_or(0.0);
        let rate = |v: u64| if elapsed > 0.0 { v as f64 / elapsed } else { 0.0 };
        StatsSnapshot {
            frames,
            bytes,
            corrupt_events: self.corrupt_events.load(Ordering::Relaxed),
            skipped_bytes: self.skipped_bytes.load(Ordering::Relaxed),
            duplicates_dropped: self.duplicates.load(Ordering::Relaxed),
            elapsed_secs: elapsed,
            effective_fps: rate(frames),
            bandwidth_bytes_per_sec: rate(bytes),
        }
    }
}

impl StatsSnapshot {
    /// One-line JSON object, the CLI stats format.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"frames\":{},\"bytes\":{},\"corrupt_events\":{},\"skipped_bytes\":{},\
             \"duplicates_dropped\":{},\"elapsed_secs\":{:.3},\"effective_fps\":{:.2},\
             \"bandwidth_bytes_per_sec\":{:.1}}}",
            self.frames,
            self.bytes,
            self.corrupt_events,
            self.skipped_bytes,
            self.duplicates_dropped,
            self.elapsed_secs,
            self.effective_fps,
            self.bandwidth_bytes_per_sec
        )
    }
}

/// A frame delivered to the consumer, already clamped into the limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveredFrame {
    pub seq: u32,
    pub timestamp_ms: u32,
    pub angles: JointAngleFrame<f64>,
    pub clamped: ClampedSlots,
}

/// Receiver half of one session.
pub struct ReceiverSession {
    frames: mpsc::Receiver<DeliveredFrame>,
    stats: Arc<SessionStats>,
    handle: JoinHandle<Result<(), WireError>>,
}

impl ReceiverSession {
    /// Ordered frame queue (single consumer).
    pub fn frames(&self) -> &mpsc::Receiver<DeliveredFrame> {
        &self.frames
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn stats_handle(&self) -> Arc<SessionStats> {
        Arc::clone(&self.stats)
    }

    /// Wait for the peer to hang up; returns the final stats.
    pub fn finish(self) -> Result<StatsSnapshot, WireError> {
        drop(self.frames);
        match self.handle.join() {
            Ok(Ok(())) => Ok(self.stats.snapshot()),
            Ok(Err(e)) => Err(e),
            Err(_) => Err(WireError::SessionClosed),
        }
    }
}

/// Accept one connection on `listener` and decode its stream on a
/// background thread until EOF. Delivered frames are in strictly
/// increasing sequence order; stale and duplicate sequence numbers are
/// counted and dropped.
pub fn serve_session(listener: TcpListener, limits: JointLimits<f64>) -> ReceiverSession {
    let stats = Arc::new(SessionStats::default());
    let (tx, rx) = mpsc::channel();
    let thread_stats = Arc::clone(&stats);
    let handle = std::thread::spawn(move || -> Result<(), WireError> {
        let (mut stream, _peer) = listener.accept()?;
        let mut deframer = Deframer::new();
        let mut buf = [0u8; 16 * MESSAGE_SIZE];
        let mut last_seq: Option<u32> = None;
        loop {
            let n = stream.read(&mut buf)?;
            if n == 0 {
                return Ok(());
            }
            thread_stats.on_bytes(n);
            deframer.push(&buf[..n]);
            while let Some(msg) = deframer.next_message() {
                if last_seq.is_some_and(|last| msg.seq <= last) {
                    thread_stats.duplicates.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                last_seq = Some(msg.seq);
                let raw: JointAngleFrame<f64> = msg.to_joint_frame();
                let (angles, clamped) = clamp_to_limits(&raw, &limits);
                let mut angles = angles;
                angles.left_occluded = msg.left_occluded();
                angles.right_occluded = msg.right_occluded();
                thread_stats.frames.fetch_add(1, Ordering::Relaxed);
                if tx
                    .send(DeliveredFrame {
                        seq: msg.seq,
                        timestamp_ms: msg.timestamp_ms,
                        angles,
                        clamped,
                    })
                    .is_err()
                {
                    // Consumer went away; drain the socket politely.
                    return Ok(());
                }
            }
            thread_stats
                .corrupt_events
                .store(deframer.corrupt_events(), Ordering::Relaxed);
            thread_stats
                .skipped_bytes
                .store(deframer.skipped_bytes(), Ordering::Relaxed);
        }
    });
    ReceiverSession {
        frames: rx,
        stats,
        handle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose3d::JointSlot;
    use std::time::Duration;

    fn bound_listener() -> (TcpListener, std::net::SocketAddr) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        (listener, addr)
    }

    #[test]
    fn frames_arrive_in_order_and_counted() {
        let (listener, addr) = bound_listener();
        let session = serve_session(listener, JointLimits::default());
        let n = 40u32;
        let sender_thread = std::thread::spawn(move || {
            let mut sender = PoseSender::connect(addr).unwrap();
            for i in 0..n {
                let mut f = JointAngleFrame::<f64>::zero();
                f.set(JointSlot::RightElbow, i as f64);
                sender.send_stamped(&f, i * 33).unwrap();
            }
        });
        sender_thread.join().unwrap();

        let mut seqs = Vec::new();
        while let Ok(frame) = session.frames().recv_timeout(Duration::from_secs(2)) {
            seqs.push(frame.seq);
            if seqs.len() == n as usize {
                break;
            }
        }
        assert_eq!(seqs.len(), n as usize);
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        let stats = session.finish().unwrap();
        assert_eq!(stats.frames, n as u64);
        assert_eq!(stats.bytes, n as u64 * MESSAGE_SIZE as u64);
    }

    #[test]
    fn duplicates_and_stale_sequences_are_dropped() {
        let (listener, addr) = bound_listener();
        let session = serve_session(listener, JointLimits::default());
        std::thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            let f = JointAngleFrame::<f64>::zero();
            for seq in [0u32, 1, 1, 0, 2] {
                stream.write_all(&encode(&f, seq, 0).unwrap()).unwrap();
            }
        });
        let mut seqs = Vec::new();
        while let Ok(frame) = session.frames().recv_timeout(Duration::from_secs(2)) {
            seqs.push(frame.seq);
            if seqs.len() == 3 {
                break;
            }
        }
        assert_eq!(seqs, vec![0, 1, 2]);
        let stats = session.finish().unwrap();
        assert_eq!(stats.duplicates_dropped, 2);
    }

    #[test]
    fn receiver_clamps_to_limits() {
        let (listener, addr) = bound_listener();
        let session = serve_session(listener, JointLimits::default());
        std::thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            let mut f = JointAngleFrame::<f64>::zero();
            f.slots[JointSlot::RightElbow as usize] = 200.0; // limit is 150
            stream.write_all(&encode(&f, 0, 0).unwrap()).unwrap();
        });
        let frame = session
            .frames()
            .recv_timeout(Duration::from_secs(2))
            .unwrap();
        assert_eq!(frame.angles.get(JointSlot::RightElbow), 150.0);
        assert!(frame.clamped.contains(JointSlot::RightElbow));
        session.finish().unwrap();
    }

    #[test]
    fn garbage_between_messages_is_skipped() {
        let (listener, addr) = bound_listener();
        let session = serve_session(listener, JointLimits::default());
        std::thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            let f = JointAngleFrame::<f64>::zero();
            stream.write_all(&encode(&f, 0, 0).unwrap()).unwrap();
            stream.write_all(&[0xDE, 0xAD, 0xBE, 0xEF, 0x4B]).unwrap();
            stream.write_all(&encode(&f, 1, 0).unwrap()).unwrap();
        });
        let mut got = 0;
        while session
            .frames()
            .recv_timeout(Duration::from_secs(2))
            .is_ok()
        {
            got += 1;
            if got == 2 {
                break;
            }
        }
        assert_eq!(got, 2);
        let stats = session.finish().unwrap();
        assert!(stats.skipped_bytes >= 5);
    }

    #[test]
    fn stats_json_is_one_object() {
        let stats = SessionStats::default();
        let json = stats.snapshot().to_json();
        assert!(json.starts_with('{') && json.ends_with('}'));
        assert!(json.contains("\"bandwidth_bytes_per_sec\""));
    }
}
