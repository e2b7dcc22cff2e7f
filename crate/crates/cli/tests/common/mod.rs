#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const LVC_NOUNS: [&str; 3] = ["yardım", "teşekkür", "karar"];
pub const LIGHT_VERBS: [(&str, &str); 2] = [("etti", "et"), ("yaptı", "yap")];
pub const PLAIN_NOUNS: [&str; 3] = ["kitap", "elma", "mektup"];
pub const PLAIN_VERBS: [(&str, &str); 3] = [("okudu", "oku"), ("yedi", "ye"), ("gördü", "gör")];

/// One four-token sentence: subject, noun, verb, full stop.
fn sentence(out: &mut String, sent_id: &str, noun: &str, verb: (&str, &str), positive: bool, rel: &str) {
    let (case, deprel) = if positive { ("Nom", rel) } else { ("Acc", "obj") };
    let text = format!("Ali {noun} {}.", verb.0);
    let _ = writeln!(out, "# sent_id = {sent_id}");
    let _ = writeln!(out, "# text = {text}");
    let _ = writeln!(out, "1\tAli\tAli\tPROPN\t_\tCase=Nom\t3\tnsubj\t_\t_");
    let _ = writeln!(out, "2\t{noun}\t{noun}\tNOUN\t_\tCase={case}\t3\t{deprel}\t_\t_");
    let _ = writeln!(out, "3\t{}\t{}\tVERB\t_\tTense=Past\t0\troot\t_\tSpaceAfter=No", verb.0, verb.1);
    let _ = writeln!(out, "4\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_");
    out.push('\n');
}

/// `n` sentences; those with `i % 5 < 2` carry a noun–light-verb arc,
/// labelled `compound:lvc` when `explicit`, bare `compound` otherwise.
pub fn mock_conllu(n: usize, explicit: bool) -> String {
    let rel = if explicit { "compound:lvc" } else { "compound" };
    let mut out = String::new();
    for i in 0..n {
        let id = format!("m{i:02}");
        if i % 5 < 2 {
            sentence(&mut out, &id, LVC_NOUNS[i % 3], LIGHT_VERBS[i % 2], true, rel);
        } else {
            sentence(&mut out, &id, PLAIN_NOUNS[i % 3], PLAIN_VERBS[i % 3], false, rel);
        }
    }
    out
}

pub fn positives_in_mock(n: usize) -> usize {
    (0..n).filter(|i| i % 5 < 2).count()
}

/// Nine items, three per condition, with lemma text and matching CoNLL-U.
pub fn mock_diagnostic() -> (String, String) {
    let mut jsonl = String::new();
    let mut conllu = String::new();
    let items: [(&str, &str, (&str, &str), bool); 9] = [
        ("Random", "elma", ("yedi", "ye"), false),
        ("Random", "kitap", ("gördü", "gör"), false),
        ("Random", "mektup", ("okudu", "oku"), false),
        ("NLVC", "kitap", ("yaptı", "yap"), false),
        ("NLVC", "elma", ("etti", "et"), false),
        ("NLVC", "mektup", ("yaptı", "yap"), false),
        ("LVC", "yardım", ("etti", "et"), true),
        ("LVC", "teşekkür", ("etti", "et"), true),
        ("LVC", "karar", ("yaptı", "yap"), true),
    ];
    for (i, (cond, noun, verb, positive)) in items.iter().enumerate() {
        let id = format!("d{i}");
        let text = format!("Ali {noun} {}.", verb.0);
        let _ = writeln!(
            jsonl,
            r#"{{"item_id":"{id}","surface_text":"{text}","condition":"{cond}","lemma_text":["ali","{noun}","{}","."],"conllu_ref":"{id}"}}"#,
            verb.1
        );
        sentence(&mut conllu, &id, noun, *verb, *positive, "compound:lvc");
    }
    (jsonl, conllu)
}

/// 147 items, 49 per condition.
pub fn table1_items() -> String {
    let mut out = String::new();
    for cond in ["Random", "NLVC", "LVC"] {
        for i in 0..49 {
            let _ = writeln!(out, r#"{{"item_id":"{cond}-{i:02}","surface_text":"","condition":"{cond}"}}"#);
        }
    }
    out
}

/// Predictions with the first `correct[c]` items of each condition right.
pub fn table1_predictions(correct: [usize; 3]) -> String {
    let mut out = String::from("item_id\tpred\n");
    for (c, cond) in ["Random", "NLVC", "LVC"].iter().enumerate() {
        let gold = *cond == "LVC";
        for i in 0..49 {
            let pred = if i < correct[c] { gold } else { !gold };
            let _ = writeln!(out, "{cond}-{i:02}\t{}", u8::from(pred));
        }
    }
    out
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// A workspace with the mock treebank, diagnostic set and a config file.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Workspace {
    pub fn new(extra: &str) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("tb")).unwrap();
        write(&dir.path().join("tb"), "mock-ud-train.conllu", &mock_conllu(30, true));
        let (jsonl, conllu) = mock_diagnostic();
        write(dir.path(), "diag.jsonl", &jsonl);
        write(dir.path(), "diag.conllu", &conllu);
        let config = write(
            dir.path(),
            "experiment.toml",
            &format!(
                "output_dir = \"out\"\n\n[data]\ntreebanks = [\"tb\"]\n\n[diagnostic]\nitems = \"diag.jsonl\"\nconllu = \"diag.conllu\"\n{extra}"
            ),
        );
        Workspace { dir, config }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }
}
