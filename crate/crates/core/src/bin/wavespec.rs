fn main() {
    std::process::exit(wavespec::cli::run(std::env::args_os()));
}
