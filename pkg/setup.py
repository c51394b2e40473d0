from setuptools import setup, find_packages

setup(
    name="untangle",
    version="0.1.0",
    description="Interpenetration repair for triangle meshes by discrete collision detection and constrained projection",
    author="untangle Team",
    packages=find_packages(exclude=["examples", "examples.*"]),
    package_data={"backend.simulation": ["scene_schema.json", "scenes/*.json"]},
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.12",
        "pydantic>=2.4.2",
        "pydantic-settings>=2.0",
        "python-dotenv>=1.0.0",
        "jsonschema>=4.0",
        "pandas>=2.0",
        "tabulate>=0.9",  # For DataFrame.to_markdown in CLI tables
    ],
    extras_require={
        "test": ["hypothesis>=6.0"],
    },
    entry_points={
        "console_scripts": [
            "untangle=backend.app.cli:main",
        ],
    },
    python_requires=">=3.10",
)
