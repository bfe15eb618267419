fn main() {
    std::process::exit(diffusion_gtd::cli::run_cli(std::env::args_os()));
}
