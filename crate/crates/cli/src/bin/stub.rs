//! Line-delimited JSON stand-in for an external generator or filter server.
//!
//! Serves standard input/output by default, or every connection on
//! `--listen ADDR`.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use actforge::filter::{gate_rule, FilterDeps, FilterRequest, FilterResponse, GateClass, SlotResult};
use actforge::genbridge::{realize_template, GenRequest, GenResponse};
use actforge::rng::TurnRng;
use actforge::{CorefList, PhraseLexicon, SlotValueDict, TurnContext};
use anyhow::Context;
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Generator,
    Filter,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Generator: template realizations. Filter: keyword rule classification.
    Normal,
    /// Generator: utterances that mention nothing. Filter: every slot missing.
    Nonsense,
    /// Reply with an `error` field.
    Error,
    /// Read requests, never reply.
    Silent,
}

#[derive(Parser)]
#[command(name = "act-forge-stub", about = "Test server for the generator and filter protocols")]
struct Args {
    #[arg(long, value_enum)]
    role: Role,
    #[arg(long, value_enum, default_value_t = Mode::Normal)]
    mode: Mode,
    /// Serve TCP on this address instead of standard input/output.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    coref: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

struct Server {
    role: Role,
    mode: Mode,
    dict: SlotValueDict,
    coref: CorefList,
    lexicon: PhraseLexicon,
}

impl Server {
    fn answer(&self, line: &str) -> Option<String> {
        if self.mode == Mode::Silent {
            return None;
        }
        let reply = match self.role {
            Role::Generator => serde_json::to_string(&self.generate(line)),
            Role::Filter => serde_json::to_string(&self.classify(line)),
        };
        Some(reply.expect("responses serialize"))
    }

    fn generate(&self, line: &str) -> GenResponse {
        let req: GenRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return GenResponse { id: 0, candidates: None, error: Some(format!("bad request: {e}")) },
        };
        let reply = |candidates, error| GenResponse { id: req.id, candidates, error };
        match self.mode {
            Mode::Error => reply(None, Some("generator unavailable".into())),
            Mode::Nonsense => reply(
                Some((0..req.beam_size.max(1)).map(|i| format!("the weather is lovely today {i}.")).collect()),
                None,
            ),
            _ => {
                let ctx = TurnContext {
                    system_utterance: req.system_utterance.clone(),
                    history: req.history.clone(),
                    ..TurnContext::default()
                };
                let mut rng = TurnRng::from_seed(req.id);
                match realize_template(&req.act, &ctx, &self.lexicon, &self.dict, &self.coref, &mut rng, req.beam_size) {
                    Ok(c) => reply(Some(c.as_slice().to_vec()), None),
                    Err(e) => reply(None, Some(e.to_string())),
                }
            }
        }
    }

    fn classify(&self, line: &str) -> FilterResponse {
        let req: FilterRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return FilterResponse { id: 0, results: None, error: Some(format!("bad request: {e}")) },
        };
        if self.mode == Mode::Error {
            return FilterResponse { id: req.id, results: None, error: Some("classifier unavailable".into()) };
        }
        let deps = FilterDeps {
            dict: &self.dict,
            coref: &self.coref,
            lexicon: &self.lexicon,
        };
        let results = req
            .slots
            .iter()
            .map(|q| {
                let gate = match self.mode {
                    Mode::Nonsense => GateClass::None,
                    _ => gate_rule(&req.system_utterance, &req.user_utterance, &q.slot, &deps),
                };
                SlotResult {
                    slot: q.slot.clone(),
                    appears: gate != GateClass::None,
                    gate,
                }
            })
            .collect();
        FilterResponse { id: req.id, results: Some(results), error: None }
    }

    fn serve(&self, reader: impl BufRead, mut writer: impl Write) -> io::Result<()> {
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(reply) = self.answer(&line) {
                writeln!(writer, "{reply}")?;
                writer.flush()?;
            }
        }
        Ok(())
    }
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let server = Arc::new(Server {
        role: args.role,
        mode: args.mode,
        dict: match &args.dict {
            Some(p) => SlotValueDict::load(p)?,
            None => SlotValueDict::bundled(),
        },
        coref: match &args.coref {
            Some(p) => CorefList::load(p)?,
            None => CorefList::bundled(),
        },
        lexicon: match &args.lexicon {
            Some(p) => PhraseLexicon::load(p)?,
            None => PhraseLexicon::bundled(),
        },
    });
    match &args.listen {
        None => server.serve(io::stdin().lock(), io::stdout().lock())?,
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let server = Arc::clone(&server);
                thread::spawn(move || {
                    let reader = BufReader::new(stream.try_clone()?);
                    server.serve(reader, stream)
                });
            }
        }
    }
    Ok(())
}
