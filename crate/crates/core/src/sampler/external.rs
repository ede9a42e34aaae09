//! Denoiser running in another process.
//!
//! Every message is a little-endian `u32` byte length followed by the
//! payload. A request carries the step, the noise level, the conditioning
//! and the latent volume as `f32`; the reply carries the clean prediction
//! or an error message. One request is in flight per connection.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::Mutex;

use super::denoiser::{Conditioning, Denoiser};
use super::latent::Latent;
use super::schedule::NoiseSchedule;
use super::SamplerError;
use crate::raymap::{Raymap, RaymapVolume};

pub const MAX_FRAME_BYTES: usize = 1 << 30;
const REQUEST_MAGIC: &[u8; 4] = b"DNRQ";
const RESPONSE_MAGIC: &[u8; 4] = b"DNRS";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub t: u32,
    pub total_steps: u32,
    pub alpha_bar: f64,
    pub anchor: Option<u32>,
    pub quarter_turns: u32,
    pub source_features: Vec<f32>,
    pub target_features: Vec<f32>,
    /// `(width, height, frames, data)`, six channels per frame.
    pub raymaps: Option<(u32, u32, u32, Vec<f32>)>,
    pub frames: u32,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub latent: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Ok {
        frames: u32,
        width: u32,
        height: u32,
        channels: u32,
        data: Vec<f32>,
    },
    Err(String),
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SamplerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| SamplerError::Protocol("truncated message".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SamplerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, SamplerError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SamplerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, SamplerError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| SamplerError::Protocol("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<(), SamplerError> {
        let got = self.take(4)?;
        if got != want {
            return Err(SamplerError::Protocol(format!("bad magic {got:?}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<(), SamplerError> {
        if self.pos != self.buf.len() {
            return Err(SamplerError::Protocol(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn put_f32s(out: &mut Vec<u8>, xs: &[f32]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn volume(dims: &[u32]) -> Result<usize, SamplerError> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .filter(|&n| n <= MAX_FRAME_BYTES / 4)
        .ok_or_else(|| SamplerError::Protocol(format!("volume {dims:?} too large")))
}

impl Request {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 4 * self.latent.len());
        out.extend_from_slice(REQUEST_MAGIC);
        for v in [VERSION, self.t, self.total_steps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.alpha_bar.to_le_bytes());
        out.extend_from_slice(&self.anchor.map_or(-1, |a| a as i32).to_le_bytes());
        out.extend_from_slice(&self.quarter_turns.to_le_bytes());
        for f in [&self.source_features, &self.target_features] {
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            put_f32s(&mut out, f);
        }
        match &self.raymaps {
            Some((w, h, n, data)) => {
                for v in [*w, *h, *n] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                put_f32s(&mut out, data);
            }
            None => out.extend_from_slice(&[0; 12]),
        }
        for v in [self.frames, self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_f32s(&mut out, &self.latent);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, SamplerError> {
        let mut c = Cursor { buf, pos: 0 };
        c.magic(REQUEST_MAGIC)?;
        let version = c.u32()?;
        if version != VERSION {
            return Err(SamplerError::Protocol(format!("unsupported version {version}")));
        }
        let (t, total_steps, alpha_bar) = (c.u32()?, c.u32()?, c.f64()?);
        let anchor = match c.i32()? {
            -1 => None,
            a if a >= 0 => Some(a as u32),
            a => return Err(SamplerError::Protocol(format!("anchor index {a}"))),
        };
        let quarter_turns = c.u32()?;
        let n = c.u32()? as usize;
        let source_features = c.f32s(n)?;
        let n = c.u32()? as usize;
        let target_features = c.f32s(n)?;
        let (rw, rh, rn) = (c.u32()?, c.u32()?, c.u32()?);
        let raymaps = if rn == 0 {
            None
        } else {
            Some((rw, rh, rn, c.f32s(volume(&[rw, rh, rn, 6])?)?))
        };
        let (frames, width, height, channels) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
        let latent = c.f32s(volume(&[frames, width, height, channels])?)?;
        c.finish()?;
        Ok(Self {
            t,
            total_steps,
            alpha_bar,
            anchor,
            quarter_turns,
            source_features,
            target_features,
            raymaps,
            frames,
            width,
            height,
            channels,
            latent,
        })
    }
}

impl Response {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = RESPONSE_MAGIC.to_vec();
        match self {
            Response::Ok {
                frames,
                width,
                height,
                channels,
                data,
            } => {
                out.extend_from_slice(&0u32.to_le_bytes());
                for v in [*frames, *width, *height, *channels] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                put_f32s(&mut out, data);
            }
            Response::Err(msg) => {
                out.extend_from_slice(&1u32.to_le_bytes());
                out.extend_from_slice(&(msg.len() as u32).to_le_bytes());
                out.extend_from_slice(msg.as_bytes());
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, SamplerError> {
        let mut c = Cursor { buf, pos: 0 };
        c.magic(RESPONSE_MAGIC)?;
        let r = match c.u32()? {
            0 => {
                let (frames, width, height, channels) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
                let data = c.f32s(volume(&[frames, width, height, channels])?)?;
                Response::Ok {
                    frames,
                    width,
                    height,
                    channels,
                    data,
                }
            }
            1 => {
                let n = c.u32()? as usize;
                let msg = String::from_utf8_lossy(c.take(n)?).into_owned();
                Response::Err(msg)
            }
            s => return Err(SamplerError::Protocol(format!("unknown status {s}"))),
        };
        c.finish()?;
        Ok(r)
    }
}

fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), SamplerError> {
    if payload.len() > MAX_FRAME_BYTES {
        return Err(SamplerError::Protocol(format!("{} byte message exceeds limit", payload.len())));
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// `Ok(None)` on a clean end of stream before the length prefix.
fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, SamplerError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_le_bytes(len) as usize;
    if n > MAX_FRAME_BYTES {
        return Err(SamplerError::Protocol(format!("{n} byte message exceeds limit")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

fn build_request(z: &[Latent], t: usize, schedule: &NoiseSchedule, cond: &Conditioning<'_>) -> Result<Request, SamplerError> {
    let first = z.first().ok_or_else(|| SamplerError::Missing("latent frames".into()))?;
    for f in z {
        f.check_shape(first)?;
    }
    let to32 = |xs: &[f64]| xs.iter().map(|&x| x as f32).collect::<Vec<_>>();
    let (source_features, target_features) = cond.features.map_or((vec![], vec![]), |(s, t)| (to32(s), to32(t)));
    Ok(Request {
        t: t as u32,
        total_steps: schedule.steps() as u32,
        alpha_bar: schedule.alpha_bar(t)?,
        anchor: cond.anchor.map(|a| a as u32),
        quarter_turns: cond.quarter_turns as u32,
        source_features,
        target_features,
        raymaps: cond.raymaps.map(|v| {
            let data = v.frames.iter().flat_map(|f| f.data.iter().map(|&x| x as f32)).collect();
            (v.width as u32, v.height as u32, v.len() as u32, data)
        }),
        frames: z.len() as u32,
        width: first.width as u32,
        height: first.height as u32,
        channels: first.channels as u32,
        latent: z.iter().flat_map(|f| f.data.iter().map(|&x| x as f32)).collect(),
    })
}

trait Duplex: Read + Write + Send {}
impl<T: Read + Write + Send> Duplex for T {}

/// Client side. The address is `host:port` for TCP or a filesystem path
/// (containing `/`) for a Unix socket.
pub struct ExternalDenoiser {
    stream: Mutex<Box<dyn Duplex>>,
}

impl ExternalDenoiser {
    pub fn connect(addr: &str) -> Result<Self, SamplerError> {
        let stream: Box<dyn Duplex> = if addr.contains('/') {
            #[cfg(unix)]
            {
                Box::new(std::os::unix::net::UnixStream::connect(addr)?)
            }
            #[cfg(not(unix))]
            {
                return Err(SamplerError::Protocol("unix sockets are not supported here".into()));
            }
        } else {
            let s = TcpStream::connect(addr)?;
            s.set_nodelay(true)?;
            Box::new(s)
        };
        Ok(Self {
            stream: Mutex::new(stream),
        })
    }

    /// Wraps an already connected stream.
    pub fn from_stream<S: Read + Write + Send + 'static>(stream: S) -> Self {
        Self {
            stream: Mutex::new(Box::new(stream)),
        }
    }
}

impl Denoiser for ExternalDenoiser {
    fn predict(
        &self,
        z: &[Latent],
        t: usize,
        schedule: &NoiseSchedule,
        cond: &Conditioning<'_>,
    ) -> Result<Vec<Latent>, SamplerError> {
        let req = build_request(z, t, schedule, cond)?;
        let mut s = self
            .stream
            .lock()
            .map_err(|_| SamplerError::Protocol("connection poisoned".into()))?;
        write_frame(&mut *s, &req.encode())?;
        let buf = read_frame(&mut *s)?.ok_or_else(|| SamplerError::Protocol("server closed the connection".into()))?;
        match Response::decode(&buf)? {
            Response::Err(msg) => Err(SamplerError::Denoiser(msg)),
            Response::Ok {
                frames,
                width,
                height,
                channels,
                data,
            } => {
                if (frames, width, height, channels) != (req.frames, req.width, req.height, req.channels) {
                    return Err(SamplerError::Protocol(format!(
                        "reply shape {frames}x{width}x{height}x{channels} does not match the request"
                    )));
                }
                let per = (width * height * channels) as usize;
                data.chunks_exact(per)
                    .map(|c| Latent::new(width as usize, height as usize, channels as usize, c.iter().map(|&x| x as f64).collect()))
                    .collect()
            }
        }
    }
}

fn answer(req: Request, denoiser: &dyn Denoiser, schedule: &NoiseSchedule) -> Result<Response, SamplerError> {
    if req.total_steps as usize != schedule.steps() {
        return Err(SamplerError::Schedule(format!(
            "client runs {} steps, server {}",
            req.total_steps,
            schedule.steps()
        )));
    }
    let ab = schedule.alpha_bar(req.t as usize)?;
    if (ab - req.alpha_bar).abs() > 1e-9 {
        return Err(SamplerError::Schedule(format!("alpha_bar {} vs {ab}", req.alpha_bar)));
    }
    let (w, h, c) = (req.width as usize, req.height as usize, req.channels as usize);
    let z: Vec<Latent> = req
        .latent
        .chunks_exact((w * h * c).max(1))
        .map(|ch| Latent::new(w, h, c, ch.iter().map(|&x| x as f64).collect()))
        .collect::<Result<_, _>>()?;
    let raymaps = match &req.raymaps {
        Some((rw, rh, n, data)) => {
            let per = (*rw * *rh * 6) as usize;
            let frames = data
                .chunks_exact(per)
                .take(*n as usize)
                .map(|ch| Raymap {
                    width: *rw as usize,
                    height: *rh as usize,
                    data: ch.iter().map(|&x| x as f64).collect(),
                    normalized: false,
                })
                .collect();
            Some(RaymapVolume::new(frames).map_err(|e| SamplerError::Protocol(e.to_string()))?)
        }
        None => None,
    };
    let src: Vec<f64> = req.source_features.iter().map(|&x| x as f64).collect();
    let tgt: Vec<f64> = req.target_features.iter().map(|&x| x as f64).collect();
    let cond = Conditioning {
        features: (!src.is_empty() || !tgt.is_empty()).then_some((&src[..], &tgt[..])),
        raymaps: raymaps.as_ref(),
        quarter_turns: req.quarter_turns as usize,
        anchor: req.anchor.map(|a| a as usize),
    };
    let out = denoiser.predict(&z, req.t as usize, schedule, &cond)?;
    Ok(Response::Ok {
        frames: out.len() as u32,
        width: req.width,
        height: req.height,
        channels: req.channels,
        data: out.iter().flat_map(|f| f.data.iter().map(|&x| x as f32)).collect(),
    })
}

/// Serves requests on one connection until the peer hangs up. Denoiser
/// failures are sent back as error replies; transport failures end the loop.
pub fn serve_connection<S: Read + Write>(
    mut stream: S,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
) -> Result<(), SamplerError> {
    while let Some(buf) = read_frame(&mut stream)? {
        let reply = match Request::decode(&buf).and_then(|req| answer(req, denoiser, schedule)) {
            Ok(r) => r,
            Err(e) => Response::Err(e.to_string()),
        };
        write_frame(&mut stream, &reply.encode())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::denoiser::{OracleDenoiser, StubDenoiser};
    use crate::sampler::schedule::make_schedule;
    use std::net::TcpListener;
    use std::thread;

    fn sample_request() -> Request {
        Request {
            t: 3,
            total_steps: 10,
            alpha_bar: 0.91,
            anchor: Some(1),
            quarter_turns: 2,
            source_features: vec![0.5, -0.25],
            target_features: vec![1.0],
            raymaps: Some((1, 1, 2, (0..12).map(|i| i as f32).collect())),
            frames: 2,
            width: 2,
            height: 1,
            channels: 1,
            latent: vec![1.0, 2.0, 3.0, 4.0],
        }
    }

    #[test]
    fn request_round_trip() {
        let r = sample_request();
        assert_eq!(Request::decode(&r.encode()).unwrap(), r);
        let plain = Request {
            anchor: None,
            raymaps: None,
            ..r
        };
        assert_eq!(Request::decode(&plain.encode()).unwrap(), plain);
    }

    #[test]
    fn malformed_messages_are_rejected() {
        let mut bytes = sample_request().encode();
        assert!(Request::decode(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(Request::decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(Request::decode(&bytes).is_err());
        let resp = Response::Err("boom".into());
        assert_eq!(Response::decode(&resp.encode()).unwrap(), resp);
    }

    #[test]
    fn tcp_round_trip_matches_local_denoiser() {
        let s = make_schedule(8, 1e-4, 0.02).unwrap();
        let target = Latent::new(4, 2, 2, (0..16).map(|i| i as f64 * 0.25).collect()).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let server_sched = s.clone();
        let server_target = target.clone();
        let handle = thread::spawn(move || {
            let (conn, _) = listener.accept().unwrap();
            serve_connection(conn, &OracleDenoiser::new(vec![server_target]), &server_sched).unwrap();
        });
        let client = ExternalDenoiser::connect(&addr).unwrap();
        let z = [Latent::zeros(4, 2, 2)];
        let got = client.predict(&z, 5, &s, &Conditioning::default()).unwrap();
        assert_eq!(got[0], target);
        let bad = client.predict(&[Latent::zeros(4, 2, 2), Latent::zeros(4, 2, 2)], 5, &s, &Conditioning::default());
        assert!(matches!(bad, Err(SamplerError::Denoiser(_))));
        drop(client);
        handle.join().unwrap();
    }

    #[cfg(unix)]
    #[test]
    fn unix_socket_with_mismatched_schedule_reports_error() {
        use std::os::unix::net::UnixListener;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dn.sock");
        let listener = UnixListener::bind(&path).unwrap();
        let handle = thread::spawn(move || {
            let (conn, _) = listener.accept().unwrap();
            let server = make_schedule(4, 1e-4, 0.02).unwrap();
            serve_connection(conn, &StubDenoiser, &server).unwrap();
        });
        let client = ExternalDenoiser::connect(path.to_str().unwrap()).unwrap();
        let s = make_schedule(8, 1e-4, 0.02).unwrap();
        let r = client.predict(&[Latent::zeros(2, 2, 1)], 2, &s, &Conditioning::default());
        assert!(matches!(r, Err(SamplerError::Denoiser(m)) if m.contains("steps")));
        let s4 = make_schedule(4, 1e-4, 0.02).unwrap();
        let ok = client.predict(&[Latent::new(2, 2, 1, vec![1.0; 4]).unwrap()], 2, &s4, &Conditioning::default()).unwrap();
        assert!((ok[0].data[0] - s4.alpha_bar(2).unwrap().sqrt()).abs() < 1e-6);
        drop(client);
        handle.join().unwrap();
    }
}
