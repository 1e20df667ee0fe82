fn main() {
    std::process::exit(indrnn_eeg::cli::run(std::env::args_os()));
}
