from setuptools import setup, find_packages

setup(
    name="spin-work-fluctuations",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "pandas",
        "numpy",
        "pyyaml",
        "matplotlib",
        "scipy",
        "statsmodels",
    ],
    entry_points={
        "console_scripts": [
            "work-fluct=work_fluctuations.cli:main",
        ],
    },
    python_requires=">=3.10",
)
