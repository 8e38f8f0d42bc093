// Drives the command-line interface in-process: generate, train, eval.
//
// cargo run --example cli_pipeline

use hecvl::cli::main_with;

pub fn run_example() -> hecvl::Result<()> {
    let dir = std::env::temp_dir().join(format!("hecvl-cli-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let d = dir.display().to_string();
    let steps: [Vec<String>; 3] = [
        vec!["generate".into(), "--out".into(), d.clone(), "--videos".into(), "12".into()],
        vec![
            "train".into(), "--corpus".into(), format!("{d}/corpus.jsonl"),
            "--out".into(), d.clone(), "--cycles".into(), "5".into(),
        ],
        vec![
            "eval".into(), "--checkpoint".into(), format!("{d}/checkpoint.hecv"),
            "--corpus".into(), format!("{d}/corpus.jsonl"),
            "--prompts".into(), format!("{d}/prompts.json"), "--out".into(), d.clone(),
        ],
    ];
    for args in steps {
        println!("$ hecvl {}", args.join(" "));
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with(std::iter::once("hecvl".to_string()).chain(args), &mut out, &mut err);
        print!("{}", String::from_utf8_lossy(&out));
        eprint!("{}", String::from_utf8_lossy(&err));
        assert_eq!(code, std::process::ExitCode::SUCCESS);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> hecvl::Result<()> {
    run_example()
}
