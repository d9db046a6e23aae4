fn main() {
    std::process::exit(markov_tower::cli::run(std::env::args_os()));
}
