//! Frame sessions between the orchestrator and its participants.
//!
//! The orchestrator holds one [`Session`] per participant and drives it
//! through a [`RemoteParticipant`], which implements the core
//! [`Participant`] trait by forwarding every call as frames. On the other
//! end [`serve_participant`] answers those frames with a local solver.
//! In-process runs use [`duplex`] pipes and the very same byte stream as TCP.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use wfcpl_core::protocol::{
    ConfigDigest, Control, Frame, Hello, Role, Tag, WindowData, HEADER_LEN,
};
use wfcpl_core::{Participant, SampleSet, TimeWindow, Waveform};

use crate::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A framed, blocking byte stream to one peer.
pub struct Session<S> {
    stream: S,
    peer: Role,
}

fn closed(e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::TimedOut
        | io::ErrorKind::WouldBlock
        | io::ErrorKind::BrokenPipe
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted => Error::ChannelClosed(e.to_string()),
        _ => Error::Io(e),
    }
}

fn write_frame<S: Write>(stream: &mut S, frame: &Frame) -> Result<()> {
    stream.write_all(&frame.encode()).map_err(closed)?;
    stream.flush().map_err(closed)
}

fn read_frame<S: Read>(stream: &mut S) -> Result<Frame> {
    let mut header = [0u8; HEADER_LEN];
    stream.read_exact(&mut header).map_err(closed)?;
    let (tag, len) = Frame::parse_header(&header)?;
    let mut payload = vec![0u8; len];
    stream.read_exact(&mut payload).map_err(closed)?;
    Ok(Frame::new(tag, payload))
}

impl<S: Read + Write> Session<S> {
    /// Orchestrator side: greet, learn the peer's role, and require the peer
    /// to echo an identical configuration digest.
    pub fn accept(mut stream: S, digest: &ConfigDigest) -> Result<Self> {
        let local = Hello::new(Role::Orchestrator);
        write_frame(&mut stream, &local.to_frame())?;
        let remote = Hello::from_frame(&read_frame(&mut stream)?)?;
        local.check(&remote)?;
        write_frame(&mut stream, &digest.to_frame())?;
        let theirs = ConfigDigest::from_frame(&read_frame(&mut stream)?)?;
        digest.compare(&theirs)?;
        Ok(Self { stream, peer: remote.role })
    }

    /// Participant side of [`Session::accept`].
    pub fn connect(mut stream: S, role: Role, digest: &ConfigDigest) -> Result<Self> {
        let local = Hello::new(role);
        let remote = Hello::from_frame(&read_frame(&mut stream)?)?;
        write_frame(&mut stream, &local.to_frame())?;
        local.check(&remote)?;
        let theirs = ConfigDigest::from_frame(&read_frame(&mut stream)?)?;
        write_frame(&mut stream, &digest.to_frame())?;
        digest.compare(&theirs)?;
        Ok(Self { stream, peer: remote.role })
    }

    pub fn peer(&self) -> Role {
        self.peer
    }

    pub fn send(&mut self, frame: &Frame) -> Result<()> {
        write_frame(&mut self.stream, frame)
    }

    pub fn recv(&mut self) -> Result<Frame> {
        read_frame(&mut self.stream)
    }

    pub fn send_window_data(&mut self, rows: &[Vec<f64>], window: u32, iteration: u32) -> Result<()> {
        let wd = WindowData { window, iteration, rows: rows.to_vec() };
        self.send(&wd.to_frame()?)
    }

    pub fn recv_window_data(&mut self) -> Result<WindowData> {
        Ok(WindowData::from_frame(&self.recv()?)?)
    }

    pub fn send_control(&mut self, verdict: Control) -> Result<()> {
        self.send(&verdict.to_frame())
    }

    pub fn recv_control(&mut self) -> Result<Control> {
        Ok(Control::from_frame(&self.recv()?)?)
    }

    /// Send TERMINATE and wait for the peer's BYE, whose payload carries the
    /// peer's per-window L2 errors as little-endian binary64.
    pub fn terminate(mut self) -> Result<Vec<f64>> {
        self.send_control(Control::Terminate)?;
        let bye = self.recv()?.expect(Tag::Bye)?;
        decode_errors(&bye.payload)
    }
}

fn decode_errors(payload: &[u8]) -> Result<Vec<f64>> {
    if payload.len() % 8 != 0 {
        return Err(wfcpl_core::Error::MalformedFrame("BYE payload is not a list of f64".into()).into());
    }
    Ok(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Rebuild the waveform a [`RemoteParticipant`] sent: one row is a constant,
/// `n + 1` rows are interpolated with `degree` on the window's substep grid.
fn rebuild_waveform(window: TimeWindow, rows: Vec<Vec<f64>>, degree: usize) -> Result<Waveform> {
    if rows.len() == 1 {
        let row = rows.into_iter().next().expect("one row");
        return Ok(Waveform::constant(row, window));
    }
    let times = window.substep_times(rows.len() - 1);
    let samples = SampleSet::new(window, times, rows)?;
    Ok(Waveform::interpolate(&samples, degree)?)
}

/// Orchestrator-side stand-in for a participant in another thread or process.
pub struct RemoteParticipant<S> {
    session: Session<S>,
    substeps: usize,
    interface_size: usize,
    initial: Vec<f64>,
    window: u32,
    iteration: u32,
    started: bool,
}

impl<S: Read + Write> RemoteParticipant<S> {
    /// Wraps an established session and reads the participant's initial
    /// interface output.
    pub fn new(mut session: Session<S>, substeps: usize) -> Result<Self> {
        let first = session.recv_window_data()?;
        if first.rows.len() != 1 {
            return Err(Error::ChannelClosed("expected one row of initial data".into()));
        }
        let initial = first.rows.into_iter().next().expect("one row");
        Ok(Self {
            session,
            substeps,
            interface_size: initial.len(),
            initial,
            window: 0,
            iteration: 0,
            started: false,
        })
    }

    /// End the session; returns the peer's per-window L2 errors.
    pub fn finish(self) -> Result<Vec<f64>> {
        self.session.terminate()
    }
}

fn participant_error(e: Error) -> wfcpl_core::Error {
    match e {
        Error::Core(c) => c,
        other => wfcpl_core::Error::Participant(other.to_string()),
    }
}

impl<S: Read + Write> Participant for RemoteParticipant<S> {
    fn interface_size(&self) -> usize {
        self.interface_size
    }

    fn substeps(&self) -> usize {
        self.substeps
    }

    fn initial_output(&mut self) -> wfcpl_core::Result<Vec<f64>> {
        Ok(self.initial.clone())
    }

    /// The participant checkpoints on its own at the start of the run; every
    /// later checkpoint means the previous window was accepted.
    fn checkpoint(&mut self) -> wfcpl_core::Result<()> {
        if !self.started {
            self.started = true;
            return Ok(());
        }
        self.window += 1;
        self.iteration = 0;
        self.session.send_control(Control::WindowConverged).map_err(participant_error)
    }

    fn restore(&mut self) -> wfcpl_core::Result<()> {
        self.iteration += 1;
        self.session.send_control(Control::Iterate).map_err(participant_error)
    }

    fn solve_window(&mut self, window: &TimeWindow, boundary: &Waveform) -> wfcpl_core::Result<SampleSet> {
        let io = |this: &mut Self| -> Result<SampleSet> {
            this.session.send_window_data(boundary.nodes(), this.window, this.iteration)?;
            let reply = this.session.recv_window_data()?;
            if reply.window != this.window || reply.iteration != this.iteration {
                return Err(Error::ChannelClosed(format!(
                    "reply for window {} iteration {}, expected {} / {}",
                    reply.window, reply.iteration, this.window, this.iteration
                )));
            }
            let times = window.substep_times(this.substeps);
            Ok(SampleSet::new(*window, times, reply.rows)?)
        };
        io(self).map_err(participant_error)
    }
}

/// Answer an orchestrator until TERMINATE. `degree` is the interpolation
/// degree for incoming boundary data; `dt_window` fixes the window grid.
pub fn serve_participant<S: Read + Write, P: Participant>(
    mut session: Session<S>,
    participant: &mut P,
    dt_window: f64,
    degree: usize,
    mut l2_error: impl FnMut(&P) -> f64,
) -> Result<()> {
    let initial = participant.initial_output()?;
    session.send_window_data(&[initial], 0, 0)?;
    participant.checkpoint()?;
    let mut window = TimeWindow::new(0.0, dt_window)?;
    let mut index = 0u32;
    let mut errors: Vec<f64> = Vec::new();
    loop {
        let frame = session.recv()?;
        match frame.tag {
            Tag::WindowData => {
                let wd = WindowData::from_frame(&frame)?;
                if wd.window != index {
                    return Err(Error::ChannelClosed(format!(
                        "data for window {} while in window {index}",
                        wd.window
                    )));
                }
                let boundary = rebuild_waveform(window, wd.rows, degree)?;
                let out = participant.solve_window(&window, &boundary)?;
                session.send_window_data(out.values(), wd.window, wd.iteration)?;
            }
            Tag::Control => match Control::from_frame(&frame)? {
                Control::Iterate => participant.restore()?,
                Control::WindowConverged => {
                    errors.push(l2_error(participant));
                    participant.checkpoint()?;
                    window = window.next();
                    index += 1;
                }
                Control::Terminate => {
                    errors.push(l2_error(participant));
                    let payload = errors.iter().flat_map(|e| e.to_le_bytes()).collect();
                    session.send(&Frame::new(Tag::Bye, payload))?;
                    return Ok(());
                }
            },
            other => {
                return Err(wfcpl_core::Error::MalformedFrame(format!(
                    "unexpected {other:?} frame from orchestrator"
                ))
                .into())
            }
        }
    }
}

/// One end of an in-memory byte pipe.
pub struct PipeEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
    timeout: Duration,
}

/// A connected pair of in-memory streams.
pub fn duplex(timeout: Duration) -> (PipeEnd, PipeEnd) {
    let (atx, brx) = channel();
    let (btx, arx) = channel();
    let end = |tx, rx| PipeEnd { tx, rx, buf: Vec::new(), pos: 0, timeout };
    (end(atx, arx), end(btx, brx))
}

impl Read for PipeEnd {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        if self.pos == self.buf.len() {
            match self.rx.recv_timeout(self.timeout) {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(io::Error::new(io::ErrorKind::TimedOut, "pipe read timed out"))
                }
                Err(RecvTimeoutError::Disconnected) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        if data.is_empty() {
            return Ok(0);
        }
        self.tx
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "pipe peer dropped"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn configure(stream: &TcpStream, timeout: Duration) -> Result<()> {
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    stream.set_nodelay(true)?;
    Ok(())
}

/// Accept one participant connection on `listener`.
pub fn accept_tcp(listener: &TcpListener, timeout: Duration, digest: &ConfigDigest) -> Result<Session<TcpStream>> {
    listener.set_nonblocking(true)?;
    let start = std::time::Instant::now();
    let stream = loop {
        match listener.accept() {
            Ok((s, _)) => break s,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if start.elapsed() > timeout {
                    return Err(Error::ChannelClosed("no participant connected in time".into()));
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    };
    stream.set_nonblocking(false)?;
    configure(&stream, timeout)?;
    Session::accept(stream, digest)
}

/// Connect to an orchestrator, retrying until `timeout` elapses.
pub fn connect_tcp(
    addr: impl ToSocketAddrs + Copy,
    role: Role,
    timeout: Duration,
    digest: &ConfigDigest,
) -> Result<Session<TcpStream>> {
    let start = std::time::Instant::now();
    let stream = loop {
        match TcpStream::connect(addr) {
            Ok(s) => break s,
            Err(e) if start.elapsed() < timeout => {
                let _ = e;
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(Error::ChannelClosed(format!("cannot connect: {e}"))),
        }
    };
    configure(&stream, timeout)?;
    Session::connect(stream, role, digest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn digest(n_d: u32) -> ConfigDigest {
        let mut d = ConfigDigest::new();
        d.insert("coupling.n_d", n_d).unwrap();
        d.insert("coupling.n_n", 1).unwrap();
        d
    }

    #[test]
    fn handshake_succeeds_on_equal_digests() {
        let (a, b) = duplex(Duration::from_secs(5));
        let peer = thread::spawn(move || Session::connect(b, Role::Neumann, &digest(1)).map(|s| s.peer()));
        let s = Session::accept(a, &digest(1)).unwrap();
        assert_eq!(s.peer(), Role::Neumann);
        assert_eq!(peer.join().unwrap().unwrap(), Role::Orchestrator);
    }

    #[test]
    fn handshake_names_mismatched_key() {
        let (a, b) = duplex(Duration::from_secs(5));
        let peer = thread::spawn(move || Session::connect(b, Role::Dirichlet, &digest(3)).err());
        let err = Session::accept(a, &digest(1)).err().unwrap();
        assert!(matches!(
            err,
            Error::Core(wfcpl_core::Error::ConfigMismatch { ref key }) if key == "coupling.n_d"
        ));
        assert!(peer.join().unwrap().is_some());
    }

    #[test]
    fn handshake_rejects_other_versions() {
        let (mut a, b) = duplex(Duration::from_secs(5));
        let peer = thread::spawn(move || Session::connect(b, Role::Dirichlet, &digest(1)).err());
        let alien = Hello { version: 2, role: Role::Orchestrator };
        write_frame(&mut a, &alien.to_frame()).unwrap();
        let err = peer.join().unwrap().unwrap();
        assert!(matches!(
            err,
            Error::Core(wfcpl_core::Error::VersionMismatch { local: 1, remote: 2 })
        ));
    }

    #[test]
    fn window_data_and_controls_keep_stream_order() {
        let (a, b) = duplex(Duration::from_secs(5));
        let peer = thread::spawn(move || {
            let mut s = Session::connect(b, Role::Dirichlet, &digest(1)).unwrap();
            let wd = s.recv_window_data().unwrap();
            let c1 = s.recv_control().unwrap();
            let c2 = s.recv_control().unwrap();
            s.send(&Frame::bye()).unwrap();
            (wd, c1, c2)
        });
        let mut s = Session::accept(a, &digest(1)).unwrap();
        let nan = f64::from_bits(0x7ff8_0000_0000_0abc);
        s.send_window_data(&[vec![1.5, -0.25], vec![nan, 0.0]], 4, 2).unwrap();
        s.send_control(Control::Iterate).unwrap();
        let errors = s.terminate().unwrap();
        assert!(errors.is_empty());
        let (wd, c1, c2) = peer.join().unwrap();
        assert_eq!((wd.window, wd.iteration), (4, 2));
        assert_eq!(wd.rows[1][0].to_bits(), nan.to_bits());
        assert_eq!((c1, c2), (Control::Iterate, Control::Terminate));
    }

    #[test]
    fn dropped_peer_reads_as_closed_channel() {
        let (mut a, b) = duplex(Duration::from_secs(5));
        drop(b);
        assert!(matches!(read_frame(&mut a), Err(Error::ChannelClosed(_))));
        let (mut a, _b) = duplex(Duration::from_millis(20));
        assert!(matches!(read_frame(&mut a), Err(Error::ChannelClosed(_))));
    }

    #[test]
    fn waveform_rebuild_matches_sender() {
        let w = TimeWindow::new(0.5, 0.5).unwrap();
        let rows = vec![vec![1.0, 2.0], vec![1.5, 2.5], vec![0.5, 3.5], vec![2.0, 0.0]];
        let s = SampleSet::new(w, w.substep_times(3), rows.clone()).unwrap();
        let sent = Waveform::interpolate(&s, 2).unwrap();
        assert_eq!(rebuild_waveform(w, rows, 2).unwrap(), sent);
        let c = Waveform::constant(vec![3.0, 4.0], w);
        assert_eq!(rebuild_waveform(w, c.nodes().to_vec(), 2).unwrap(), c);
    }
}
