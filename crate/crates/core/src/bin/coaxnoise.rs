fn main() {
    std::process::exit(coaxnoise::cli::run(std::env::args_os()));
}
