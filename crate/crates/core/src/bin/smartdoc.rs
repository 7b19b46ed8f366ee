fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let stdout = std::io::stdout();
    let code = smartdoc::cli::run_from(std::env::args_os(), &mut stdout.lock());
    std::process::exit(code);
}
