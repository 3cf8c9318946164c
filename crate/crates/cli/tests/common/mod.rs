#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::thread;

use ersn_core::corpus::write_dataset;
use ersn_core::embeddings::{EmbeddingKind, EmbeddingTable};
use ersn_core::synthetic::{two_topic_corpus, SyntheticSpec};

pub fn ersn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ersn"))
        .args(args)
        .env_remove("ERSN_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).lines().last().unwrap_or_default().to_string()
}

pub fn check(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A labeled synthetic dataset plus two embedding tables over its vocabulary.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub data: PathBuf,
    pub emb_a: PathBuf,
    pub emb_b: PathBuf,
}

impl Workspace {
    pub fn new(documents: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec { documents, dim: 12, ..SyntheticSpec::default() };
        let a = two_topic_corpus(&spec).unwrap();
        let data = dir.path().join("labeled.jsonl");
        write_dataset(&a.dataset, &data).unwrap();
        let emb_a = dir.path().join("w2v.vec");
        a.table.save(&emb_a).unwrap();
        let emb_b = dir.path().join("glove.vec");
        // a second table over the same vocabulary: components reversed and shifted
        let rows = a.table.rows().map(|(t, v)| (t.to_string(), v.iter().rev().map(|x| x + 0.25).collect::<Vec<f64>>()));
        let b = EmbeddingTable::from_pairs("glove", EmbeddingKind::Custom, spec.dim, rows.collect::<Vec<_>>()).unwrap();
        b.save(&emb_b).unwrap();
        Workspace { dir, data, emb_a, emb_b }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Serves each (status, body) once, in order, on a local port.
pub fn serve(responses: Vec<(u16, Vec<u8>)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(&body);
        }
    });
    format!("http://{addr}")
}
