import sys

from work_fluctuations.utils.config import load_run_config


def main() -> None:

    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    cfg = load_run_config(config_name)

    print("[print_config] Loaded configuration")
    print(f"Config file:     {config_name}")
    print(f"Offsets (Hz):    dnu_h={cfg.dnu_h}, dnu_c={cfg.dnu_c}, J={cfg.j_coupling}")
    print(f"Interacting:     {cfg.interacting}")
    print(f"Temperatures:    {cfg.temperatures_peV} peV")
    print(f"Noise sigma:     {cfg.sigma}, seed {cfg.seed}, trials {cfg.trials}")
    print(f"MLE:             tol={cfg.mle_tol}, max_iter={cfg.mle_max_iter}")
    print(f"Output dir:      {cfg.output_dir}")

if __name__ == "__main__":
    main()
