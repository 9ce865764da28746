fn main() {
    let code = synchan::cli::run(std::env::args_os());
    std::process::exit(code);
}
