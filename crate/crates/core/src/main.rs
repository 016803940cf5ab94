fn main() {
    std::process::exit(qmeasure::cli::run(std::env::args_os()));
}
