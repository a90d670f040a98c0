from setuptools import setup

setup(
    # Application name:
    name="lagmech",
    # Version number (initial):
    version="1.0.0",
    # Application author details:
    author="Jago Strong-Wright",
    author_email="jagoosw@protonmail.com",
    # Packages
    packages=["lagmech"],
    # Bundled system definitions
    package_data={"lagmech": ["gallery/*.cfg"]},
    #
    license="LICENSE.txt",
    description="lagmech derives and integrates the equations of motion of free, constrained and time constrained mechanical systems written in a chart, and classifies the inertial forces of reference frames",
    # Dependent packages (distributions)
    install_requires=[
        "scipy",
        "fuzzywuzzy",
        "numpy",
        "regex",
    ],
    # Command line
    entry_points={"console_scripts": ["lagmech=lagmech.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
