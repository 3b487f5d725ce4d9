//! Driving the command-line front end in-process and replaying a report.

use specpreserve::cli;
use specpreserve::Result;

pub fn run() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("specpreserve-cli-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let f = dir.join("sum2.json");
    std::fs::write(&f, r#"{"arity": 2, "kind": "builtin", "name": "sum"}"#)?;
    let out = dir.join("report.json");

    let args = ["specpreserve", "falsify", "--f", f.to_str().unwrap(), "--m", "2", "--families", "thm6", "--trials", "4"];
    let mut args: Vec<&str> = args.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    let code = cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
    println!("exit code {code}");

    let report = std::fs::read_to_string(&out)?;
    let again = cli::replay(&report)?;
    println!("replayed verdict {:?}, byte-identical: {}", again.verdict, again.json == report);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("example failed");
}
