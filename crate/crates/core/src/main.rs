fn main() {
    std::process::exit(thermosense::cli::run(std::env::args_os()));
}
