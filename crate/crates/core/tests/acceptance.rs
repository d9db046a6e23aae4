//! Runs `mtower all` in-process and reports one line per criterion.
//! Set `MTOWER_ACCEPTANCE_OUT` to keep the tables; `MTOWER_SKIP_RERUN=1`
//! skips the second run used by the determinism criterion.

use std::path::PathBuf;

fn main() {
    let keep = std::env::var_os("MTOWER_ACCEPTANCE_OUT").map(PathBuf::from);
    let tmp = tempfile::tempdir().expect("temp dir");
    let out = keep.unwrap_or_else(|| tmp.path().to_path_buf());
    let mut args: Vec<String> = vec!["mtower".into(), "all".into(), "--seed".into(), "20160".into()];
    args.push("--out".into());
    args.push(out.to_string_lossy().into_owned());
    let skip_rerun = std::env::var("MTOWER_SKIP_RERUN").is_ok_and(|v| v == "1");
    if skip_rerun {
        args.push("--no-rerun".into());
    }
    println!("acceptance suite, output in {}", out.display());
    let code = markov_tower::cli::run(args);
    let text = std::fs::read_to_string(out.join("manifest.json")).expect("manifest written");
    let manifest: serde_json::Value = serde_json::from_str(&text).expect("manifest parses");
    let verdicts = manifest["verdicts"].as_object().expect("verdicts");
    println!();
    let mut failed = 0;
    for (name, pass) in verdicts {
        let pass = pass.as_bool().unwrap_or(false);
        failed += usize::from(!pass);
        println!("criterion {name}: {}", if pass { "pass" } else { "FAIL" });
    }
    let expected = markov_tower::cli::suite::CRITERIA - usize::from(skip_rerun);
    println!("{} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if code != 0 || failed > 0 || verdicts.len() != expected {
        std::process::exit(1);
    }
}
