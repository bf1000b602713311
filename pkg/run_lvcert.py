from lvcert.main import main

if __name__ == "__main__":
    main()
# Entry point for the lvcert command line (python run_lvcert.py certify --config example.ini).
