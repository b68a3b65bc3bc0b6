fn main() {
    std::process::exit(sphere_ot_cli::run(std::env::args_os()));
}
