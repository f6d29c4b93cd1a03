//! Session service for interactive clients.
//!
//! Newline-delimited JSON over TCP. Each connection owns at most one live
//! engine session; a new `start_task` discards the running one. Every
//! client line gets exactly one reply line. Bad messages get an `error`
//! reply and the connection stays open.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use forcepinch_core::calibration::{build_force_mapping, ForceAnchors};
use forcepinch_core::mapping::{cursor_radius, SpeedSample};
use forcepinch_core::metrics::{trial_metrics, TrialMetrics};
use forcepinch_core::{
    start_session, CalibrationProfile, EngineOptions, InputSample, Session, Shape, Task, TaskKind,
    Technique, TechniqueConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::default_gain;

/// A task given by kind (generated from the seed) or as a full definition.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TaskSpec {
    Kind(TaskKind),
    Definition(Task),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    StartTask {
        task: TaskSpec,
        technique: Technique,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        shape: Option<Shape>,
        #[serde(default)]
        rollback: Option<bool>,
        #[serde(default)]
        min_engage_force: Option<f64>,
    },
    Input {
        t: f64,
        /// `[x, y]`, or `[x, y, z]` for replaying recorded 3-D hand data.
        pos: Vec<f64>,
        force: f64,
        pinch: bool,
    },
    EndTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        /// Planar position of the controlled point.
        pointer: [f64; 2],
        object: [f64; 3],
        speed: f64,
        cursor_radius: f64,
        pinch_active: bool,
    },
    Summary(TrialMetrics),
    Error {
        msg: String,
    },
}

/// Profile for pre-normalized force: raw 0, 0.5 and 1 are the anchors.
pub fn unit_profile(c: f64) -> CalibrationProfile {
    let anchors = ForceAnchors::new(0.0, 0.5, 1.0).expect("ordered anchors");
    build_force_mapping(anchors, c).expect("valid default mapping")
}

/// Protocol state of one connection.
#[derive(Debug, Default)]
pub struct Connection {
    session: Option<Session>,
}

impl Connection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// Handles one raw protocol line.
    pub fn handle_line(&mut self, line: &str) -> ServerMessage {
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("malformed json: {e}"))
            .and_then(|v| {
                serde_json::from_value::<ClientMessage>(v)
                    .map_err(|e| format!("invalid message: {e}"))
            });
        match parsed.and_then(|m| self.handle(m)) {
            Ok(reply) => reply,
            Err(msg) => ServerMessage::Error { msg },
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Result<ServerMessage, String> {
        match msg {
            ClientMessage::StartTask {
                task,
                technique,
                c,
                seed,
                shape,
                rollback,
                min_engage_force,
            } => {
                let task = match task {
                    TaskSpec::Kind(k) => k.make_trial(seed, shape),
                    TaskSpec::Definition(t) => t,
                };
                let c = c.unwrap_or_else(|| default_gain(task.kind()));
                let cfg = TechniqueConfig::new(technique, c);
                cfg.validate().map_err(|e| e.to_string())?;
                let profile = unit_profile(c);
                let options = EngineOptions {
                    rollback,
                    min_engage_force,
                };
                let session = start_session(task, &cfg, Some(&profile), seed, options)
                    .map_err(|e| e.to_string())?;
                let reply = state(
                    session.object_pos(),
                    SpeedSample(c),
                    cursor_radius(SpeedSample(c), &cfg),
                    false,
                );
                self.session = Some(session);
                Ok(reply)
            }
            ClientMessage::Input {
                t,
                pos,
                force,
                pinch,
            } => {
                let session = self.session.as_mut().ok_or("no active task")?;
                let hand_pos = match pos[..] {
                    [x, y] => [x, y, 0.0],
                    [x, y, z] => [x, y, z],
                    _ => return Err(format!("pos needs 2 or 3 coordinates, got {}", pos.len())),
                };
                if !(0.0..=1.0).contains(&force) {
                    return Err(format!("force must be in [0, 1], got {force}"));
                }
                let frame = session
                    .step(&InputSample {
                        t,
                        hand_pos,
                        raw_force: force,
                        pinching: pinch,
                    })
                    .map_err(|e| e.to_string())?;
                Ok(state(
                    frame.object_pos,
                    SpeedSample(frame.speed),
                    frame.cursor_radius,
                    frame.pinch_active,
                ))
            }
            ClientMessage::EndTask => {
                let session = self.session.take().ok_or("no active task")?;
                let metrics =
                    trial_metrics(&session.into_trial_log()).map_err(|e| e.to_string())?;
                Ok(ServerMessage::Summary(metrics))
            }
        }
    }
}

fn state(object: [f64; 3], speed: SpeedSample, radius: f64, pinch_active: bool) -> ServerMessage {
    ServerMessage::State {
        pointer: [object[0], object[1]],
        object,
        speed: speed.0,
        cursor_radius: radius,
        pinch_active,
    }
}

fn serve_connection(stream: TcpStream) -> io::Result<()> {
    // replies are small and latency-bound
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut conn = Connection::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        let reply = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => conn.handle_line(line.trim_end()),
            Err(e) => ServerMessage::Error {
                msg: format!("invalid utf-8: {e}"),
            },
        };
        let mut text = serde_json::to_string(&reply).expect("replies serialize");
        text.push('\n');
        writer.write_all(text.as_bytes())?;
        writer.flush()?;
    }
}

/// Listening service; each accepted connection runs on its own thread.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let accept = thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(s) = stream {
                    thread::spawn(move || {
                        let _ = serve_connection(s);
                    });
                }
            }
        });
        Ok(Self {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting connections. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(h) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect(self.addr);
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start(conn: &mut Connection, technique: &str) -> ServerMessage {
        conn.handle_line(&format!(
            r#"{{"type":"start_task","task":"slider","technique":"{technique}","seed":3}}"#
        ))
    }

    #[test]
    fn input_before_start_is_an_error() {
        let mut conn = Connection::new();
        let r = conn.handle_line(r#"{"type":"input","t":0,"pos":[0,0],"force":0,"pinch":false}"#);
        assert!(matches!(r, ServerMessage::Error { .. }));
        assert!(matches!(
            conn.handle_line(r#"{"type":"end_task"}"#),
            ServerMessage::Error { .. }
        ));
    }

    #[test]
    fn malformed_lines_keep_the_session() {
        let mut conn = Connection::new();
        assert!(matches!(
            start(&mut conn, "constant"),
            ServerMessage::State { .. }
        ));
        for bad in ["{", "[]", r#"{"type":"warp"}"#, r#"{"type":"input","t":0}"#] {
            assert!(
                matches!(conn.handle_line(bad), ServerMessage::Error { .. }),
                "{bad}"
            );
        }
        assert!(conn.session().is_some());
        let r = conn.handle_line(r#"{"type":"input","t":0,"pos":[0,0],"force":2,"pinch":true}"#);
        assert!(matches!(r, ServerMessage::Error { .. }));
    }

    #[test]
    fn state_tracks_object() {
        let mut conn = Connection::new();
        start(&mut conn, "constant");
        conn.handle_line(r#"{"type":"input","t":0.00,"pos":[0,0],"force":0,"pinch":true}"#);
        let r =
            conn.handle_line(r#"{"type":"input","t":0.01,"pos":[0.2,0.1],"force":0,"pinch":true}"#);
        match r {
            ServerMessage::State {
                pointer,
                object,
                speed,
                ..
            } => {
                assert_eq!(speed, 0.5);
                assert!((pointer[0] - 0.1).abs() < 1e-15);
                // slider keeps the object on its axis
                assert_eq!(object[1], 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            conn.handle_line(r#"{"type":"end_task"}"#),
            ServerMessage::Summary(_)
        ));
        assert!(conn.session().is_none());
    }
}
