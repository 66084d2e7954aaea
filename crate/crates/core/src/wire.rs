//! Newline-delimited JSON transport to external model servers.
//!
//! An endpoint is either a TCP address (`host:port`, optionally prefixed
//! with `tcp://`) or a command whose standard streams carry the protocol
//! (`exec:python serve.py --flag`). Each [`Connection`] has at most one
//! request in flight; [`Pool`] hands out connections to concurrent callers.

use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Command(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(WireError::BadEndpoint(s.to_string()));
            }
            return Ok(Endpoint::Command(argv));
        }
        let addr = s.strip_prefix("tcp://").unwrap_or(s);
        match addr.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => {
                Ok(Endpoint::Tcp(addr.to_string()))
            }
            _ => Err(WireError::BadEndpoint(s.to_string())),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp://{addr}"),
            Endpoint::Command(argv) => write!(f, "exec:{}", argv.join(" ")),
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed endpoint `{0}` (expected host:port, tcp://host:port or exec:COMMAND)")]
    BadEndpoint(String),
    #[error("cannot reach {endpoint}: {source}")]
    Connect {
        endpoint: Endpoint,
        #[source]
        source: io::Error,
    },
    #[error("{endpoint} did not answer within {timeout:?}")]
    Timeout { endpoint: Endpoint, timeout: Duration },
    #[error("i/o error talking to {endpoint}: {source}")]
    Io {
        endpoint: Endpoint,
        #[source]
        source: io::Error,
    },
    #[error("{endpoint} closed the connection")]
    Closed { endpoint: Endpoint },
    #[error("malformed response from {endpoint}: {message} (line: {line})")]
    Malformed {
        endpoint: Endpoint,
        line: String,
        message: String,
    },
    #[error("response id {got} does not match request id {expected} from {endpoint}")]
    IdMismatch {
        endpoint: Endpoint,
        expected: u64,
        got: u64,
    },
    #[error("{endpoint} reported an error: {message}")]
    Remote { endpoint: Endpoint, message: String },
}

enum Transport {
    Tcp {
        writer: TcpStream,
        reader: BufReader<TcpStream>,
    },
    Child {
        child: Child,
        stdin: ChildStdin,
        lines: Receiver<io::Result<String>>,
    },
}

pub struct Connection {
    endpoint: Endpoint,
    timeout: Duration,
    transport: Transport,
    broken: bool,
}

impl Connection {
    pub fn open(endpoint: &Endpoint, timeout: Duration) -> Result<Self, WireError> {
        let connect_err = |source| WireError::Connect {
            endpoint: endpoint.clone(),
            source,
        };
        let transport = match endpoint {
            Endpoint::Tcp(addr) => {
                let resolved = addr
                    .to_socket_addrs()
                    .map_err(connect_err)?
                    .next()
                    .ok_or_else(|| connect_err(io::Error::new(io::ErrorKind::NotFound, "no address")))?;
                let stream = TcpStream::connect_timeout(&resolved, timeout).map_err(connect_err)?;
                stream.set_read_timeout(Some(timeout)).map_err(connect_err)?;
                stream.set_nodelay(true).map_err(connect_err)?;
                let reader = BufReader::new(stream.try_clone().map_err(connect_err)?);
                Transport::Tcp {
                    writer: stream,
                    reader,
                }
            }
            Endpoint::Command(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(connect_err)?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let (tx, rx) = mpsc::channel();
                thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                });
                Transport::Child {
                    child,
                    stdin,
                    lines: rx,
                }
            }
        };
        Ok(Connection {
            endpoint: endpoint.clone(),
            timeout,
            transport,
            broken: false,
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Keep this connection out of the pool after the current call.
    pub fn mark_broken(&mut self) {
        self.broken = true;
    }

    /// Send one line and wait for one line back.
    pub fn round_trip(&mut self, line: &str) -> Result<String, WireError> {
        let result = self.exchange(line);
        if result.is_err() {
            self.broken = true;
        }
        result
    }

    fn exchange(&mut self, line: &str) -> Result<String, WireError> {
        debug_assert!(!line.contains('\n'));
        let endpoint = &self.endpoint;
        let io_err = |source| WireError::Io {
            endpoint: endpoint.clone(),
            source,
        };
        let timeout_err = || WireError::Timeout {
            endpoint: endpoint.clone(),
            timeout: self.timeout,
        };
        match &mut self.transport {
            Transport::Tcp { writer, reader } => {
                writer.write_all(line.as_bytes()).map_err(io_err)?;
                writer.write_all(b"\n").map_err(io_err)?;
                writer.flush().map_err(io_err)?;
                let mut buf = String::new();
                match reader.read_line(&mut buf) {
                    Ok(0) => Err(WireError::Closed {
                        endpoint: endpoint.clone(),
                    }),
                    Ok(_) => Ok(buf.trim_end_matches(['\n', '\r']).to_string()),
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                        Err(timeout_err())
                    }
                    Err(e) => Err(io_err(e)),
                }
            }
            Transport::Child { stdin, lines, .. } => {
                stdin.write_all(line.as_bytes()).map_err(io_err)?;
                stdin.write_all(b"\n").map_err(io_err)?;
                stdin.flush().map_err(io_err)?;
                match lines.recv_timeout(self.timeout) {
                    Ok(Ok(l)) => Ok(l.trim_end_matches('\r').to_string()),
                    Ok(Err(e)) => Err(io_err(e)),
                    Err(RecvTimeoutError::Timeout) => Err(timeout_err()),
                    Err(RecvTimeoutError::Disconnected) => Err(WireError::Closed {
                        endpoint: endpoint.clone(),
                    }),
                }
            }
        }
    }

    /// Serialize `req`, exchange it, and decode the response.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&mut self, req: &Req) -> Result<Resp, WireError> {
        let line = serde_json::to_string(req).expect("request serializes");
        let reply = self.round_trip(&line)?;
        serde_json::from_str(&reply).map_err(|e| {
            self.broken = true;
            WireError::Malformed {
                endpoint: self.endpoint.clone(),
                line: reply.clone(),
                message: e.to_string(),
            }
        })
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Transport::Child { child, .. } = &mut self.transport {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A set of reusable connections to one endpoint. Connections that saw an
/// error are discarded rather than returned to the pool.
pub struct Pool {
    endpoint: Endpoint,
    timeout: Duration,
    idle: Mutex<Vec<Connection>>,
    next_id: AtomicU64,
}

impl Pool {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        Pool {
            endpoint,
            timeout,
            idle: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn next_id(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::Relaxed)
    }

    pub fn with_connection<T>(
        &self,
        f: impl FnOnce(&mut Connection) -> Result<T, WireError>,
    ) -> Result<T, WireError> {
        let pooled = self.idle.lock().expect("pool lock").pop();
        let mut conn = match pooled {
            Some(c) => c,
            None => Connection::open(&self.endpoint, self.timeout)?,
        };
        let out = f(&mut conn);
        if !conn.broken {
            self.idle.lock().expect("pool lock").push(conn);
        }
        out
    }
}
