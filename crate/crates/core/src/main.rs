fn main() {
    std::process::exit(logicmix::cli::run(std::env::args_os()));
}
