from setuptools import setup, find_packages

setup(
    name="tree-correlation",
    version="0.1.0",
    author="Tree Correlation Toolkit Contributors",
    description="Geometric correlation of paired tree-shaped data",
    long_description=open("readme.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.23.5",
        "scipy>=1.10.1",
        "pandas>=1.5.3",
        "colorama>=0.4.6",
    ],
    extras_require={
        "test": ["pytest>=7.2.0"],
    },
    entry_points={
        "console_scripts": [
            "treecorr=src.run_analysis:main",
        ],
    },
)
