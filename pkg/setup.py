from setuptools import setup, find_packages

setup(
    name="lagrange-bnb",
    version="0.1.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "numpy",
        "networkx",
        "python-dotenv",
    ],
    entry_points={
        "console_scripts": ["lagrange-bnb=src.main:main"],
    },
)
