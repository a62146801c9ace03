from setuptools import setup, find_packages
from pathlib import Path

def read_requirements():
    req_path = Path(__file__).parent / "requirements.txt"
    with req_path.open("r") as f:
        return [line.strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="freight_ledger",
    version="0.1.0",
    description="Accelerated carrier invoice factoring on linked logistics and finance ledgers",
    packages=find_packages(exclude=["tests", "scripts"]),
    install_requires=read_requirements(),
    extras_require={
        "dev": ["pytest", "hypothesis"]
    },
    entry_points={
        "console_scripts": ["freightledger=freight_ledger.cli:main"],
    },
    include_package_data=True,
    python_requires=">=3.9",
)
