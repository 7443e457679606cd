fn main() {
    std::process::exit(acbias_cli::run(std::env::args_os()));
}
