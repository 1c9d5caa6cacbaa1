use clap::Parser;

fn main() {
    let cli = lowrank_cli::Cli::parse();
    let code = match lowrank_cli::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lowrank: {}", e.to_string().replace('\n', " "));
            1
        }
    };
    std::process::exit(code);
}
