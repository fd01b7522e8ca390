fn main() {
    let threads = jetflow::cli::threads_from_env();
    std::process::exit(jetflow::cli::run(std::env::args_os(), threads));
}
