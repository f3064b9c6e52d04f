//! Newline-delimited JSON stepping protocol.
//!
//! Client lines: `{"cmd":"reset","config":{..}}`, `{"cmd":"step","action":n}`,
//! `{"cmd":"close"}`. Every reset or step is answered with one frame
//! `{"obs":..,"reward":..,"done":..,"info":..}`; failures with `{"error":".."}`.

use std::io::{self, BufRead, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use explore_core::env::{Clock, Env, EnvConfig, Observation, StepInfo};
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

/// Significant digits kept for floats on the wire.
pub const WIRE_DIGITS: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Request {
    Reset {
        #[serde(default)]
        config: EnvConfig,
    },
    Step {
        action: i64,
    },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub error: String,
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Rounds every non-integer number in `v` to `digits` significant digits.
pub fn round_floats(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0), digits);
            if let Some(r) = Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|i| round_floats(i, digits)),
        Value::Object(map) => map.values_mut().for_each(|i| round_floats(i, digits)),
        _ => {}
    }
}

/// Serializes a message as one wire line (without the newline).
pub fn encode(msg: &impl Serialize) -> String {
    let mut v = serde_json::to_value(msg).expect("protocol messages serialize");
    round_floats(&mut v, WIRE_DIGITS);
    v.to_string()
}

pub fn reset_frame(env: &Env) -> Frame {
    let info = StepInfo {
        explored: env.explored_fraction(),
        d_n: env.config().neighbor_threshold(),
        expert_cost: env.expert_plan().map(|p| p.cost),
        ..StepInfo::default()
    };
    Frame {
        obs: env.observation().clone(),
        reward: 0.0,
        done: env.is_done(),
        info,
    }
}

pub enum Reply {
    Line(String),
    Close,
}

/// One client's environment.
pub struct Session {
    env: Option<Env>,
    clock: Option<Clock>,
}

impl Session {
    pub fn new(clock: Option<Clock>) -> Self {
        Self { env: None, clock }
    }

    pub fn env(&self) -> Option<&Env> {
        self.env.as_ref()
    }

    pub fn handle(&mut self, line: &str) -> Reply {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return error_line(format!("malformed request: {e}")),
        };
        match req {
            Request::Close => Reply::Close,
            Request::Reset { config } => match Env::reset_with_clock(config, self.clock) {
                Ok(env) => {
                    let frame = reset_frame(&env);
                    self.env = Some(env);
                    Reply::Line(encode(&frame))
                }
                Err(e) => error_line(e.to_string()),
            },
            Request::Step { action } => {
                let Some(env) = self.env.as_mut() else {
                    return error_line("invalid state: step before reset".into());
                };
                let Ok(action) = usize::try_from(action) else {
                    return error_line("protocol error: action out of range".into());
                };
                match env.step(action) {
                    Ok(t) => Reply::Line(encode(&Frame {
                        obs: t.observation,
                        reward: t.reward,
                        done: t.done,
                        info: t.info,
                    })),
                    Err(e) => error_line(e.to_string()),
                }
            }
        }
    }
}

fn error_line(error: String) -> Reply {
    Reply::Line(encode(&ErrorFrame { error }))
}

/// Serves one session over a line stream until `close` or end of input.
pub fn serve_stream(input: impl BufRead, mut output: impl Write, clock: Option<Clock>) -> io::Result<()> {
    let mut session = Session::new(clock);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match session.handle(&line) {
            Reply::Line(s) => {
                output.write_all(s.as_bytes())?;
                output.write_all(b"\n")?;
                output.flush()?;
            }
            Reply::Close => break,
        }
    }
    Ok(())
}

fn serve_connection(stream: TcpStream, clock: Option<Clock>) -> io::Result<()> {
    let reader = io::BufReader::new(stream.try_clone()?);
    serve_stream(reader, stream, clock)
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_tcp(listener: TcpListener, clock: Option<Clock>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        thread::spawn(move || {
            if let Err(e) = serve_connection(stream, clock) {
                eprintln!("connection closed: {e}");
            }
        });
    }
    Ok(())
}
