import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="mnarlbm",
    version="0.1.0",
    author="Hernán Blanco Landa",
    author_email="hblanco@pm.me",
    description=(
        "Co-clustering of binary matrices with nonignorable missing values based on "
        "the Latent Block Model."
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/hblanko/mnarlbm",
    packages=setuptools.find_packages(),
    package_data={"mnarlbm": ["*.yaml", "schema/*.json"]},
    install_requires=[
        "attrs == 21.4.0",
        "joblib == 1.1.0",
        "jsonschema == 3.2.0",
        "numpy == 1.22.4",
        "ruamel.yaml == 0.17.21",
        "scikit-learn == 1.1.1",
        "scipy == 1.8.1",
    ],
    entry_points={"console_scripts": ["mnarlbm = mnarlbm.__main__:parse_cli"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
)
